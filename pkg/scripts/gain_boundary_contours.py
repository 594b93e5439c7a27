#!/usr/bin/env python3
"""Export expected-correctness contour grids on the (q, s) plane as CSV.

One file per actor accuracy, e.g. contour_p0.25_z5.csv. The q + s = 1
anti-diagonal carries exactly the bare-actor accuracy; everything below
it is gain territory, everything above it is loss.

    python scripts/gain_boundary_contours.py --out-dir grids/ --z 5
"""

import argparse
from pathlib import Path

from acsql.theory import contour_grid, write_contour_csv


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p", type=float, nargs="+", default=[0.25, 0.75])
    parser.add_argument("--z", type=int, default=5)
    parser.add_argument("--resolution", type=int, default=101)
    parser.add_argument("--out-dir", type=Path, default=Path("."))
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for p in args.p:
        grid = contour_grid(p=p, z=args.z, resolution=args.resolution)
        out = args.out_dir / f"contour_p{p:g}_z{args.z}.csv"
        with open(out, "w", encoding="utf-8") as f:
            rows = write_contour_csv(grid, f)
        print(f"{out}: {rows} rows")


if __name__ == "__main__":
    main()
