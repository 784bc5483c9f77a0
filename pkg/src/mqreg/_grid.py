"""Shared enumeration of leading-stage levels on a fixed-step grid."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import EmptyGridError, ValidationError
from .qr import QuantileLevel

_EPS = 1e-9


def grid_levels(target, step) -> np.ndarray:
    """Multiples of `step` strictly inside (target, 1 - step].

    These are the admissible leading-stage levels for a bivariate
    factorization of `target`; excluding the last `step` of the unit
    interval avoids extreme-quantile fits with too few observations.
    """
    target = QuantileLevel(target)
    step = float(step)
    if not 0.0 < step < 1.0:
        raise ValidationError(f"step must lie in (0, 1), got {step!r}")
    j_min = int(math.floor(target / step))
    while j_min * step <= target + _EPS:
        j_min += 1
    j_max = int(round((1.0 - step) / step))
    while j_max * step > 1.0 - step + _EPS:
        j_max -= 1
    while (j_max + 1) * step <= 1.0 - step + _EPS:
        j_max += 1
    if j_max < j_min:
        raise EmptyGridError(
            f"no grid multiple of {step} lies in ({float(target)}, {1.0 - step}]"
        )
    return np.arange(j_min, j_max + 1) * step
