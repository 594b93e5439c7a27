#!/usr/bin/env python3
"""Sweep the eight (p, q, s) corner settings over z = 1..5 and print the
closed-form value next to a Monte-Carlo estimate for each cell.

Full-size reproduction (10^6 trials x 100 repeats per cell, slow):
    python scripts/closed_form_vs_simulation.py --trials 1000000 --repeats 100

Quick sanity sweep:
    python scripts/closed_form_vs_simulation.py --trials 100000 --repeats 5
"""

import argparse
import itertools

from acsql.mc_sim import SimulationConfig, simulate
from acsql.theory import ACParams, expected_prob

CORNERS = [0.25, 0.75]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--z-max", type=int, default=5)
    args = parser.parse_args()

    z_values = list(range(1, args.z_max + 1))
    header = "  ".join(f"z={z}" + " " * 14 for z in z_values)
    print(f"{'(p, q, s)':<22}{header}")
    for p, q, s in itertools.product(CORNERS, CORNERS, CORNERS):
        cells = []
        for z in z_values:
            params = ACParams(p=p, q=q, s=s, z=z)
            theory_value = expected_prob(params)
            report = simulate(
                SimulationConfig(
                    params=params, trials=args.trials, repeats=args.repeats, seed=args.seed
                )
            )
            cells.append(f"({theory_value:.5f}, {report.estimated_accuracy:.5f})")
        print(f"({p:.2f}, {q:.2f}, {s:.2f})    " + "  ".join(cells))


if __name__ == "__main__":
    main()
