"""Monte-Carlo simulation of the actor-critic loop.

Each trial plays the loop with a coin-flip actor and a coin-flip critic:
at iteration i the actor draw u decides correctness (correct iff u < p);
at iterations 1..z-1 a second draw v decides the verdict (a correct
candidate is rejected iff v < s, a wrong one accepted iff v < q); an
accept verdict stops the trial, and the z-th generation is emitted with
no verdict. The estimate is the fraction of trials whose emitted
candidate was correct, averaged over independent repeats.

Determinism contract
--------------------
Repeat r uses a PCG64 generator seeded with SeedSequence([seed, r]), a
pure function of the config. Within a repeat, trial t consumes row t of
a single (trials, 2z-1) uniform block laid out per trial iteration as
(correctness draw, verdict draw, correctness draw, ...); the final mean
reduces per-repeat estimates in ascending repeat order. Identical
configs therefore produce bit-identical reports, independent of machine
or process count.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .theory import ACParams, expected_prob

_MAX_SEED = 2**64


@dataclass(frozen=True)
class SimulationConfig:
    params: ACParams
    trials: int = 1_000_000
    repeats: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.repeats, int) or self.repeats < 1:
            raise ValueError(f"repeats must be a positive integer, got {self.repeats!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < _MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class SimulationReport:
    estimated_accuracy: float
    theory_prob: float
    abs_difference: float
    per_repeat_estimates: tuple[float, ...]
    trials: int
    repeats: int
    seed: int
    params: ACParams = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "params": {
                "p": self.params.p,
                "q": self.params.q,
                "s": self.params.s,
                "z": self.params.z,
            },
            "trials": self.trials,
            "repeats": self.repeats,
            "seed": self.seed,
            "estimated_accuracy": self.estimated_accuracy,
            "theory_prob": self.theory_prob,
            "abs_difference": self.abs_difference,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def _repeat_rng(seed: int, repeat: int) -> np.random.Generator:
    """Child generator for one repeat; a pure function of (seed, repeat)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, repeat])))


def _run_repeat(params: ACParams, trials: int, rng: np.random.Generator) -> float:
    p, q, s, z = params.p, params.q, params.s, params.z
    draws = rng.random((trials, 2 * z - 1))
    correct = draws[:, 0::2] < p  # (trials, z)
    if z == 1:
        return float(correct[:, 0].mean())
    verdicts = draws[:, 1::2]  # (trials, z-1)
    checked = correct[:, : z - 1]
    accepted = np.where(checked, verdicts >= s, verdicts < q)
    any_accept = accepted.any(axis=1)
    first_accept = accepted.argmax(axis=1)
    emitted_correct = np.where(
        any_accept,
        checked[np.arange(trials), first_accept],
        correct[:, z - 1],
    )
    return float(emitted_correct.mean())


def simulate(config: SimulationConfig) -> SimulationReport:
    """Estimate the emitted-correctness probability by simulation."""
    estimates = [
        _run_repeat(config.params, config.trials, _repeat_rng(config.seed, r))
        for r in range(config.repeats)
    ]
    estimated = sum(estimates) / config.repeats
    theory = expected_prob(config.params)
    return SimulationReport(
        estimated_accuracy=estimated,
        theory_prob=theory,
        abs_difference=abs(estimated - theory),
        per_repeat_estimates=tuple(estimates),
        trials=config.trials,
        repeats=config.repeats,
        seed=config.seed,
        params=config.params,
    )


def agreement_bound(prob: float, trials: int, repeats: int) -> float:
    """Three-sigma binomial bound for |simulation - closed form| plus slack."""
    n = trials * repeats
    return 3.0 * float(np.sqrt(max(prob * (1.0 - prob), 0.0) / n)) + 1e-6
