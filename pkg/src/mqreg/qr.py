"""Pinball-loss machinery for univariate linear quantile regression.

Provides the check (pinball) loss, a dense Frisch-Newton style primal-dual
interior-point solver, an exact small-instance LP oracle based on vertex
enumeration, an optimality (subgradient) diagnostic, and the integrated
biweight indicator used to smooth generated regressors.

The solver works on the bounded dual of the quantile-regression LP,

    min c'a   s.t.  Z'a = (1 - tau) Z'1,  0 <= a <= 1,   c = -y,

and recovers the coefficients as the negated equality multipliers.  The
interior-point path converges to the analytic center of the optimal face,
which makes coefficients reproducible even when the optimum is not unique.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .exceptions import (
    DegenerateError,
    DimensionMismatchError,
    InvalidLevelError,
    MaxIterationsError,
    NonpositiveBandwidthError,
    RankDeficientError,
    TooLargeError,
    ValidationError,
)

__all__ = [
    "QuantileLevel",
    "SolverOptions",
    "QrFit",
    "pinball_loss",
    "fit_qr",
    "lp_oracle_fit",
    "smoothed_indicator",
    "default_bandwidth",
    "subgradient_check",
    "column_rank",
]


class QuantileLevel(float):
    """A quantile level, constrained to the open unit interval.

    Construction rejects the endpoints (and anything non-finite), so a
    value of this type can always be passed straight to the solver.
    """

    __slots__ = ()

    def __new__(cls, value) -> "QuantileLevel":
        v = float(value)
        if not 0.0 < v < 1.0:
            raise InvalidLevelError(
                f"quantile level must lie strictly inside (0, 1), got {value!r}"
            )
        return super().__new__(cls, v)


@dataclass(frozen=True)
class SolverOptions:
    """Interior-point solver settings.

    tol is the relative duality-gap tolerance; step_scale is the fraction
    of the distance to the boundary taken at each step.
    """

    tol: float = 1e-10
    max_iter: int = 200
    step_scale: float = 0.99995
    rank_tol: float = 1e-10


@dataclass(frozen=True)
class QrFit:
    """One univariate quantile regression solution.

    objective is the *sum* of pinball losses of the residuals at `level`.
    gap is the final duality gap for interior-point fits.  Oracle fits set
    n_tied_vertices to the number of distinct optimal basic solutions
    (1 means the optimum is a unique vertex).
    """

    level: float
    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    iterations: int
    converged: bool
    gap: float = 0.0
    n_tied_vertices: int | None = None

    def __post_init__(self):
        self.beta.flags.writeable = False
        self.residuals.flags.writeable = False


def pinball_loss(u, tau):
    """Check loss rho_tau(u) = u * (tau - 1[u <= 0]); vectorized in u."""
    tau = QuantileLevel(tau)
    u = np.asarray(u, dtype=float)
    out = np.where(u > 0.0, tau * u, (tau - 1.0) * u) + 0.0  # normalize -0.0
    return float(out) if out.ndim == 0 else out


def _as_matrix(y, Z):
    y = np.ascontiguousarray(y, dtype=float)
    Z = np.ascontiguousarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if y.ndim != 1 or Z.ndim != 2 or y.shape[0] != Z.shape[0]:
        raise DimensionMismatchError(
            f"incompatible shapes: y {y.shape}, design {Z.shape}"
        )
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(Z)):
        raise ValidationError("design and response must be finite")
    return y, Z


def column_rank(Z, rtol=1e-10):
    """Numerical column rank via column-pivoted QR.

    Returns (rank, kept) where kept holds the indices of a maximal set of
    independent columns, in ascending order.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return 0, np.empty(0, dtype=int)
    _, R, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return 0, np.empty(0, dtype=int)
    rank = int(np.sum(d > rtol * d[0]))
    return rank, np.sort(piv[:rank])


@njit(cache=True)
def _fnb_core(Z, y, tau, tol, max_iter, eta):  # pragma: no cover - jitted
    n, w = Z.shape
    c = -y
    b = np.zeros(w)
    for i in range(n):
        for j in range(w):
            b[j] += Z[i, j]
    for j in range(w):
        b[j] *= 1.0 - tau

    # (1-tau)*1 is strictly interior and primal feasible by construction
    x = np.full(n, 1.0 - tau)
    s = np.full(n, tau)

    M = np.zeros((w, w))
    for i in range(n):
        for j in range(w):
            for l in range(w):
                M[j, l] += Z[i, j] * Z[i, l]
    rhs = np.zeros(w)
    for i in range(n):
        for j in range(w):
            rhs[j] += Z[i, j] * c[i]
    yd = np.linalg.solve(M, rhs)

    r = np.empty(n)
    acc = 0.0
    for i in range(n):
        pred = 0.0
        for j in range(w):
            pred += Z[i, j] * yd[j]
        r[i] = c[i] - pred
        acc += abs(r[i])
    pad = 0.5 * (1.0 + acc / n)
    z = np.empty(n)
    wv = np.empty(n)
    for i in range(n):
        z[i] = (r[i] if r[i] > 0.0 else 0.0) + pad
        wv[i] = z[i] - r[i]

    rb = np.zeros(w)
    ru = np.empty(n)
    rc = np.empty(n)
    q = np.empty(n)
    T = np.empty(n)
    zx = np.empty(n)
    ws = np.empty(n)
    Zy = np.empty(n)
    dx_a = np.empty(n)
    ds_a = np.empty(n)
    dz_a = np.empty(n)
    dw_a = np.empty(n)
    dx = np.empty(n)
    ds = np.empty(n)
    dz = np.empty(n)
    dw = np.empty(n)

    bmax = 1.0
    for j in range(w):
        if abs(b[j]) > bmax:
            bmax = abs(b[j])
    cmax = 1.0
    for i in range(n):
        if abs(c[i]) > cmax:
            cmax = abs(c[i])

    it = 0
    converged = False
    gap = 0.0
    while it < max_iter:
        it += 1
        for j in range(w):
            rb[j] = b[j]
        gap = 0.0
        pobj = 0.0
        rcmax = 0.0
        for i in range(n):
            pred = 0.0
            for j in range(w):
                pred += Z[i, j] * yd[j]
            Zy[i] = pred
        for i in range(n):
            for j in range(w):
                rb[j] -= Z[i, j] * x[i]
        for i in range(n):
            ru[i] = 1.0 - x[i] - s[i]
            rc[i] = c[i] - Zy[i] - z[i] + wv[i]
            if abs(rc[i]) > rcmax:
                rcmax = abs(rc[i])
            gap += x[i] * z[i] + s[i] * wv[i]
            pobj += c[i] * x[i]
        rbmax = 0.0
        for j in range(w):
            if abs(rb[j]) > rbmax:
                rbmax = abs(rb[j])
        if gap <= tol * (1.0 + abs(pobj)) and rbmax <= 1e-9 * bmax and rcmax <= 1e-9 * cmax:
            converged = True
            break

        for i in range(n):
            zx[i] = z[i] / x[i]
            ws[i] = wv[i] / s[i]
            q[i] = 1.0 / (zx[i] + ws[i])

        for j in range(w):
            for l in range(w):
                M[j, l] = 0.0
        for i in range(n):
            qi = q[i]
            for j in range(w):
                t = qi * Z[i, j]
                for l in range(j, w):
                    M[j, l] += t * Z[i, l]
        for j in range(w):
            for l in range(j):
                M[j, l] = M[l, j]

        # affine (predictor) direction
        for j in range(w):
            rhs[j] = rb[j]
        for i in range(n):
            T[i] = -rc[i] - z[i] + wv[i] + ws[i] * ru[i]
            t = q[i] * T[i]
            for j in range(w):
                rhs[j] -= Z[i, j] * t
        dy_a = np.linalg.solve(M, rhs)
        ap = 1.0
        ad = 1.0
        for i in range(n):
            pred = 0.0
            for j in range(w):
                pred += Z[i, j] * dy_a[j]
            dx_a[i] = q[i] * (pred + T[i])
            ds_a[i] = ru[i] - dx_a[i]
            dz_a[i] = -z[i] - zx[i] * dx_a[i]
            dw_a[i] = -wv[i] - ws[i] * ds_a[i]
            if dx_a[i] < 0.0:
                t = -x[i] / dx_a[i]
                if t < ap:
                    ap = t
            if ds_a[i] < 0.0:
                t = -s[i] / ds_a[i]
                if t < ap:
                    ap = t
            if dz_a[i] < 0.0:
                t = -z[i] / dz_a[i]
                if t < ad:
                    ad = t
            if dw_a[i] < 0.0:
                t = -wv[i] / dw_a[i]
                if t < ad:
                    ad = t
        gap_aff = 0.0
        for i in range(n):
            gap_aff += (x[i] + ap * dx_a[i]) * (z[i] + ad * dz_a[i])
            gap_aff += (s[i] + ap * ds_a[i]) * (wv[i] + ad * dw_a[i])
        if gap_aff < 0.0:
            gap_aff = 0.0
        sigma = (gap_aff / gap) ** 3
        mu = sigma * gap / (2.0 * n)

        # corrector gives the total direction
        for j in range(w):
            rhs[j] = rb[j]
        for i in range(n):
            T[i] = (
                -rc[i]
                + (mu / x[i] - z[i] - dx_a[i] * dz_a[i] / x[i])
                - (mu / s[i] - wv[i] - ds_a[i] * dw_a[i] / s[i])
                + ws[i] * ru[i]
            )
            t = q[i] * T[i]
            for j in range(w):
                rhs[j] -= Z[i, j] * t
        dy = np.linalg.solve(M, rhs)
        ap = 1.0
        ad = 1.0
        for i in range(n):
            pred = 0.0
            for j in range(w):
                pred += Z[i, j] * dy[j]
            dx[i] = q[i] * (pred + T[i])
            ds[i] = ru[i] - dx[i]
            dz[i] = mu / x[i] - z[i] - dx_a[i] * dz_a[i] / x[i] - zx[i] * dx[i]
            dw[i] = mu / s[i] - wv[i] - ds_a[i] * dw_a[i] / s[i] - ws[i] * ds[i]
            if dx[i] < 0.0:
                t = -x[i] / dx[i]
                if t < ap:
                    ap = t
            if ds[i] < 0.0:
                t = -s[i] / ds[i]
                if t < ap:
                    ap = t
            if dz[i] < 0.0:
                t = -z[i] / dz[i]
                if t < ad:
                    ad = t
            if dw[i] < 0.0:
                t = -wv[i] / dw[i]
                if t < ad:
                    ad = t
        ap = min(1.0, eta * ap)
        ad = min(1.0, eta * ad)
        for i in range(n):
            x[i] += ap * dx[i]
            s[i] += ap * ds[i]
            z[i] += ad * dz[i]
            wv[i] += ad * dw[i]
        for j in range(w):
            yd[j] += ad * dy[j]

    beta = np.empty(w)
    for j in range(w):
        beta[j] = -yd[j]
    return beta, x, it, converged, gap


def fit_qr(y, Z, tau, opts: SolverOptions | None = None) -> QrFit:
    """Fit a linear quantile regression by interior point.

    Minimizes the mean pinball loss of ``y - Z @ beta`` at level `tau`.

    Parameters
    ----------
    y : (n,) array_like
        Response vector.
    Z : (n, w) array_like
        Design matrix, full column rank, with n > w.
    tau : float
        Quantile level in (0, 1).
    opts : SolverOptions, optional
        Solver settings; defaults are tight enough for 1e-8-level
        coefficient reproducibility.

    Returns
    -------
    QrFit

    Raises
    ------
    RankDeficientError
        If the design is numerically collinear.
    MaxIterationsError
        If the duality-gap tolerance is not reached.
    """
    tau = QuantileLevel(tau)
    opts = opts or SolverOptions()
    y, Z = _as_matrix(y, Z)
    n, w = Z.shape
    if n <= w:
        raise ValidationError(f"need more observations than columns (n={n}, w={w})")
    rank, _ = column_rank(Z, opts.rank_tol)
    if rank < w:
        raise RankDeficientError(f"design has rank {rank} < {w} columns")
    beta, _a, it, converged, gap = _fnb_core(
        Z, y, float(tau), opts.tol, opts.max_iter, opts.step_scale
    )
    if not converged:
        raise MaxIterationsError(
            f"no convergence after {it} iterations (gap {gap:.3e})"
        )
    resid = y - Z @ beta
    obj = float(np.sum(pinball_loss(resid, tau)))
    return QrFit(
        level=float(tau),
        beta=beta,
        residuals=resid,
        objective=obj,
        iterations=it,
        converged=converged,
        gap=float(gap),
    )


def lp_oracle_fit(y, Z, tau) -> QrFit:
    """Exact reference solver by exhaustive vertex enumeration.

    A quantile-regression optimum is always attained at a basic solution
    interpolating w observations, so enumerating all full-rank w-subsets
    and keeping the least-objective interpolant yields a global optimum.
    Ties are broken toward the lexicographically smallest coefficient
    vector.  Intended for tests; limits n <= 40 and w <= 4 keep the
    enumeration cheap.
    """
    tau = QuantileLevel(tau)
    y, Z = _as_matrix(y, Z)
    n, w = Z.shape
    if n > 40 or w > 4:
        raise TooLargeError(f"oracle limits are n <= 40, w <= 4 (got n={n}, w={w})")
    if n <= w:
        raise ValidationError(f"need more observations than columns (n={n}, w={w})")

    idx = np.array(list(itertools.combinations(range(n), w)), dtype=int)
    sub = Z[idx]
    dets = np.abs(np.linalg.det(sub))
    scale = np.prod(np.maximum(np.abs(sub).max(axis=2), 1e-300), axis=1)
    good = dets > 1e-10 * scale
    if not np.any(good):
        raise DegenerateError("no full-rank observation subset")
    betas = np.linalg.solve(sub[good], y[idx[good]][..., None])[..., 0]
    resid = y[None, :] - betas @ Z.T
    objs = np.sum(np.where(resid > 0.0, tau * resid, (tau - 1.0) * resid), axis=1)

    best = float(np.min(objs))
    tied = np.flatnonzero(objs <= best + 1e-10 * (1.0 + abs(best)))
    order = np.lexsort(betas[tied].T[::-1])
    beta = betas[tied[order[0]]].copy()
    distinct = int(np.unique(np.round(betas[tied], 8), axis=0).shape[0])
    res = y - Z @ beta
    return QrFit(
        level=float(tau),
        beta=beta,
        residuals=res,
        objective=float(np.sum(pinball_loss(res, tau))),
        iterations=0,
        converged=True,
        n_tied_vertices=distinct,
    )


def smoothed_indicator(u, bandwidth):
    """Integrated biweight step: 0 below -bandwidth, 1 above +bandwidth.

    The derivative of the step is the biweight kernel
    (15/16)(1 - t^2)^2 on [-1, 1], an order-2 kernel, so the step rises
    smoothly from exactly 0 to exactly 1 with value 1/2 at the origin.
    """
    b = float(bandwidth)
    if not (b > 0.0) or not math.isfinite(b):
        raise NonpositiveBandwidthError(f"bandwidth must be positive, got {bandwidth!r}")
    t = np.clip(np.asarray(u, dtype=float) / b, -1.0, 1.0)
    out = 0.5 + (15.0 / 16.0) * (t - (2.0 / 3.0) * t**3 + 0.2 * t**5)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def default_bandwidth(n: int) -> float:
    """Bandwidth n**(-1/3); decays fast enough for an order-2 kernel."""
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    return float(n) ** (-1.0 / 3.0)


def subgradient_check(y, Z, tau, beta):
    """Optimality certificate for a candidate coefficient vector.

    Returns (norm, bound) where norm is the max-norm of the empirical
    subgradient (1/n) sum_i z_i (tau - 1[r_i <= 0]) and bound is
    (w/n) * max_i ||z_i||_inf.  At an exact LP optimum in general
    position the norm cannot exceed the bound, because only the w
    interpolated observations carry an ambiguous indicator.
    """
    tau = QuantileLevel(tau)
    y, Z = _as_matrix(y, Z)
    n, w = Z.shape
    beta = np.asarray(beta, dtype=float)
    r = y - Z @ beta
    g = Z.T @ (tau - (r <= 0.0)) / n
    bound = w / n * float(np.max(np.abs(Z)))
    return float(np.max(np.abs(g))), bound
