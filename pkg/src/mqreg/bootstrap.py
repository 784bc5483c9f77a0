"""Pairs-bootstrap inference for the sequential coefficient block.

Every resample refits the whole chain, so the uncertainty carried into
later stages by the estimated conditioning indicators is propagated into
the standard errors, which is exactly what plug-in covariance formulas
struggle to do for this estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import EstimationError, ValidationError
from ._parallel import run_ordered
from .qr import SolverOptions
from .sequential import DataMatrix, FactorizationPath, fit_mqr

__all__ = ["BootstrapResult", "bootstrap_mqr"]


@dataclass(frozen=True)
class BootstrapResult:
    """Coefficient draws plus per-coefficient summaries.

    draws has shape (successful resamples, k, m), in resample order.
    Interval endpoints are order statistics of the draws: the ceil(q*B)-th
    smallest value at each tail, so they are exactly reproducible from
    the draws array.
    """

    draws: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    n_resamples: int
    failed: int
    seed: int | None

    def __post_init__(self):
        for arr in (self.draws, self.se, self.lower, self.upper):
            arr.flags.writeable = False


def _order_statistic(sorted_draws: np.ndarray, q: float) -> np.ndarray:
    b = sorted_draws.shape[0]
    idx = min(max(math.ceil(q * b), 1), b)
    return sorted_draws[idx - 1]


def _boot_one(args):
    Y, X, path, smoothed, bandwidth, opts, seq = args
    rng = np.random.default_rng(seq)
    n = Y.shape[0]
    idx = rng.integers(0, n, size=n)
    try:
        fit = fit_mqr(
            DataMatrix(Y=Y[idx], X=X[idx]),
            path,
            smoothed=smoothed,
            bandwidth=bandwidth,
            opts=opts,
        )
        return fit.B, None
    except Exception as err:
        return None, str(err)


def bootstrap_mqr(
    data: DataMatrix,
    path: FactorizationPath,
    n_resamples: int,
    level: float = 0.9,
    seed: int | None = 0,
    smoothed: bool = False,
    bandwidth: float | None = None,
    threads: int = 1,
    opts: SolverOptions | None = None,
) -> BootstrapResult:
    """Pairs (row) bootstrap of the full sequential fit.

    Parameters
    ----------
    data, path
        Sample and factorization to refit per resample.
    n_resamples : int
        Number of resamples, at least 50.
    level : float
        Percentile-interval coverage level, e.g. 0.9.
    seed : int
        Master seed; resample r draws from the r-th spawned stream, so
        the first draws are unchanged when n_resamples grows.
    threads : int
        Worker processes; results are assembled in resample order either
        way.

    Raises
    ------
    EstimationError
        If more than 2% of resamples fail to fit.
    """
    if n_resamples < 50:
        raise ValidationError(f"need at least 50 resamples, got {n_resamples}")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"interval level must be in (0, 1), got {level!r}")
    opts = opts or SolverOptions()
    # a zero-variance outcome would produce silent zero SEs; fail loudly
    spread = data.Y.max(axis=0) - data.Y.min(axis=0)
    if np.any(spread <= 0.0):
        bad = int(np.argmax(spread <= 0.0))
        raise EstimationError(f"outcome column {bad} is constant; nothing to resample")
    streams = np.random.SeedSequence(seed).spawn(n_resamples)
    items = [
        (data.Y, data.X, path, smoothed, bandwidth, opts, s) for s in streams
    ]
    rows = run_ordered(_boot_one, items, threads=threads, chunksize=8)

    good = [B for B, _err in rows if B is not None]
    failed = n_resamples - len(good)
    if failed > 0.02 * n_resamples:
        first = next(err for _B, err in rows if err is not None)
        raise EstimationError(
            f"{failed}/{n_resamples} resamples failed (> 2% attrition); "
            f"first error: {first}"
        )
    draws = np.stack(good, axis=0)
    se = draws.std(axis=0, ddof=1)
    sorted_draws = np.sort(draws, axis=0)
    lower = _order_statistic(sorted_draws, (1.0 - level) / 2.0)
    upper = _order_statistic(sorted_draws, (1.0 + level) / 2.0)
    return BootstrapResult(
        draws=draws,
        se=se,
        lower=lower.copy(),
        upper=upper.copy(),
        level=level,
        n_resamples=n_resamples,
        failed=failed,
        seed=seed,
    )
