"""Shared constants and small numeric helpers."""
from __future__ import annotations

import numpy as np

# Speed of light, m/s. The ranging arithmetic in this package follows the
# c = 3e8 convention throughout (ranges, delays and wrap periods are all
# derived from it, so mixing in the CODATA value would break round trips).
SPEED_OF_LIGHT = 3.0e8


class EstimationFailure(RuntimeError):
    """Raised when an estimator cannot produce a usable value (e.g. no

    polynomial root close enough to the unit circle)."""


class LogFormatError(ValueError):
    """Raised for malformed or schema-violating log/config content."""


def wrap_pm_pi(x):
    """Wrap angle(s) to [-pi, pi).

    Single choke point for wrapped-phase arithmetic; nothing else in the
    package is allowed to wrap implicitly.
    """
    return np.mod(np.asarray(x) + np.pi, 2.0 * np.pi) - np.pi


def percentile_nearest_rank(values, q: float) -> float:
    """Nearest-rank percentile (no interpolation), q in (0, 100]."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("percentile of empty set")
    if not 0.0 < q <= 100.0:
        raise ValueError(f"percentile q out of range: {q}")
    rank = int(np.ceil(q / 100.0 * v.size))
    return float(v[rank - 1])
