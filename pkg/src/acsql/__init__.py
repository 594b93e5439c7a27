"""Actor-critic generate-and-verify toolkit for text-to-SQL systems."""

from .theory import ACParams, GainRegion, classify_gain, expected_prob, limit_prob

__version__ = "0.1.0"

__all__ = [
    "ACParams",
    "GainRegion",
    "classify_gain",
    "expected_prob",
    "limit_prob",
    "__version__",
]
