"""Analytic bivariate-normal ground truth.

Normal distribution functions, a deterministic bivariate normal CDF,
lower-truncation moments, and an exact oracle for the joint-probability
quantile curve of a bivariate normal law.  Everything here is meant to be
accurate enough (1e-12-class) to serve as test ground truth for the
sequential estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr, ndtri

from .exceptions import BracketFailureError, EstimationError, ValidationError
from ._grid import grid_levels
from .qr import QuantileLevel

__all__ = [
    "BvnParams",
    "TruncatedMoments",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "bvn_cdf",
    "truncated_normal_moments",
    "oracle_conditional_quantile",
    "oracle_graph",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Gauss-Legendre rules reused across calls
_GL48_X, _GL48_W = np.polynomial.legendre.leggauss(48)
_GL32_X, _GL32_W = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class BvnParams:
    """Means, standard deviations and correlation of a bivariate normal."""

    mu1: float
    mu2: float
    s1: float
    s2: float
    rho: float

    def __post_init__(self):
        if not (self.s1 > 0.0 and self.s2 > 0.0):
            raise ValidationError("standard deviations must be positive")
        if not abs(self.rho) < 1.0:
            raise ValidationError(f"|rho| must be < 1, got {self.rho!r}")


@dataclass(frozen=True)
class TruncatedMoments:
    """Mean and variance of a normal variable truncated to the lower tail."""

    mean: float
    variance: float
    q: float


def std_normal_cdf(z) -> float:
    """Standard normal CDF."""
    return float(ndtr(z))


def std_normal_pdf(z) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * float(z) ** 2) / _SQRT_2PI


def std_normal_quantile(p) -> float:
    """Inverse standard normal CDF on (0, 1)."""
    return float(ndtri(QuantileLevel(p)))


def _bvn_quadrant_integral(h: float, k: float, rho: float) -> float:
    """Integral of the bvn density over correlations [0, rho], rho > 0.

    Uses the single-integral identity d/dr P(Z1<=h, Z2<=k; r) =
    bvn density at (h, k), substituting r = sin(theta) to remove the
    square-root Jacobian.  Panels refine geometrically toward rho when
    the correlation is large, where the integrand steepens.
    """
    if rho <= 0.925:
        breaks = [0.0, rho]
        nodes, weights = _GL48_X, _GL48_W
    else:
        breaks = [0.0, 0.925]
        g = 0.075 / 4.0
        while 1.0 - g < rho:
            breaks.append(1.0 - g)
            g /= 4.0
        breaks.append(rho)
        nodes, weights = _GL32_X, _GL32_W
    hk = h * k
    hs = 0.5 * (h * h + k * k)
    total = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        ta, tb = math.asin(a), math.asin(b)
        mid = 0.5 * (ta + tb)
        half = 0.5 * (tb - ta)
        theta = mid + half * nodes
        sn = np.sin(theta)
        cs2 = 1.0 - sn * sn
        total += half * float(np.dot(weights, np.exp((sn * hk - hs) / cs2)))
    return total


def bvn_cdf(h, k, rho) -> float:
    """P(Z1 <= h, Z2 <= k) for standard bivariate normal correlation rho."""
    h, k, rho = float(h), float(k), float(rho)
    if not abs(rho) < 1.0:
        raise ValidationError(f"|rho| must be < 1, got {rho!r}")
    if rho == 0.0:
        return float(ndtr(h) * ndtr(k))
    if rho < 0.0:
        # (Z1, -Z2) has correlation -rho
        return max(0.0, float(ndtr(h)) - bvn_cdf(h, -k, -rho))
    p = float(ndtr(h) * ndtr(k)) + _bvn_quadrant_integral(h, k, rho) / (2.0 * math.pi)
    return min(1.0, max(0.0, p))


def truncated_normal_moments(mu, sigma, q) -> TruncatedMoments:
    """Moments of Y | Y <= q for Y ~ N(mu, sigma^2).

    With alpha = (q - mu)/sigma and lam = phi(alpha)/Phi(alpha):
    mean = mu - sigma*lam and variance = sigma^2 * (1 - lam*(lam + alpha)).
    Far in the lower tail (alpha < -37) the hazard ratio is evaluated by
    its asymptotic expansion, which avoids the catastrophic cancellation
    in 1 - lam*(lam + alpha).
    """
    mu, sigma, q = float(mu), float(sigma), float(q)
    if not sigma > 0.0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    alpha = (q - mu) / sigma
    if alpha < -37.0:
        # Mills-ratio expansion; computing lam + alpha directly avoids the
        # huge-term cancellation that the hazard formula would suffer here
        inv = 1.0 / -alpha
        lam_plus_alpha = (
            inv - 2.0 * inv**3 + 10.0 * inv**5 - 74.0 * inv**7 + 706.0 * inv**9
        )
        lam = -alpha + lam_plus_alpha
        vfac = 1.0 - lam * lam_plus_alpha
    else:
        # phi(a)/Phi(a) via the scaled complementary error function: exact
        # cancellation-free hazard for the whole lower tail
        lam = math.sqrt(2.0 / math.pi) / float(erfcx(-alpha / math.sqrt(2.0)))
        vfac = 1.0 - lam * (lam + alpha)
    return TruncatedMoments(
        mean=mu - sigma * lam, variance=sigma * sigma * vfac, q=q
    )


def _conditional_tail_prob(params: BvnParams, q1: float, q2: float) -> float:
    """P(Y2 <= q2 | Y1 <= q1) via the exact joint law."""
    h = (q1 - params.mu1) / params.s1
    denom = float(ndtr(h))
    if denom <= 0.0:
        raise EstimationError(f"P(Y1 <= {q1}) underflows; conditioning impossible")
    k = (q2 - params.mu2) / params.s2
    return bvn_cdf(h, k, params.rho) / denom


def oracle_conditional_quantile(params: BvnParams, q1, p) -> float:
    """Quantile of Y2 given the event Y1 <= q1, by bracketed bisection.

    The conditioned law is *not* Gaussian; the root is found on the exact
    conditional CDF built from the bivariate normal CDF.
    """
    p = QuantileLevel(p)
    q1 = float(q1)
    lo = params.mu2 - 10.0 * params.s2
    hi = params.mu2 + 10.0 * params.s2
    for _attempt in range(2):
        lo_ok = hi_ok = False
        width = hi - lo
        for _ in range(64):
            if _conditional_tail_prob(params, q1, lo) < p:
                lo_ok = True
                break
            lo -= width
            width *= 2.0
        width = hi - lo
        for _ in range(64):
            if _conditional_tail_prob(params, q1, hi) > p:
                hi_ok = True
                break
            hi += width
            width *= 2.0
        if lo_ok and hi_ok:
            break
        lo, hi = lo - 100.0 * params.s2, hi + 100.0 * params.s2
    else:
        raise BracketFailureError(
            f"could not bracket conditional quantile at q1={q1}, p={float(p)}"
        )
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _conditional_tail_prob(params, q1, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def oracle_graph(params: BvnParams, target, step) -> list[tuple[float, float]]:
    """Exact joint-probability quantile curve of a bivariate normal.

    For each leading level t1 on the grid, q1 is the t1-quantile of Y1
    and q2 solves P(Y2 <= q2 | Y1 <= q1) = target/t1, so every returned
    pair satisfies P(Y1 <= q1, Y2 <= q2) = target.
    """
    target = QuantileLevel(target)
    points = []
    for t1 in grid_levels(target, step):
        q1 = params.mu1 + params.s1 * float(ndtri(t1))
        q2 = oracle_conditional_quantile(params, q1, target / t1)
        points.append((q1, q2))
    return points
