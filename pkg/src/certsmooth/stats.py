"""Scalar statistics behind every certificate.

Standard normal CDF/quantile, one-sided exact Clopper-Pearson lower bounds
and the certified-radius formula ``R = sigma * Phi^{-1}(p_lower)``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Acklam-style rational starting point; Newton on Phi supplies the accuracy.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549671010322563e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425

PA_CLAMP = 1.0 - 1e-15
CP_TOL = 1e-12


class DomainError(ValueError):
    """An argument lies outside the domain of a statistical function."""


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def _lower_quantile(p: float) -> float:
    # p in (0, 0.5]; result <= 0 and relative-accurate deep in the tail
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        z = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        z = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    for _ in range(4):
        dens = normal_pdf(z)
        if dens == 0.0:
            break
        step = (normal_cdf(z) - p) / dens
        z -= step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


def normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF.

    Accurate to about machine precision in both tails; the upper half is
    obtained by symmetry so ``normal_quantile(1 - p) == -normal_quantile(p)``.

    Raises
    ------
    DomainError
        If ``p`` is not strictly inside (0, 1).
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _lower_quantile(p)
    return -_lower_quantile(1.0 - p)


def _check_counts(k: int, n: int, alpha: float) -> None:
    if isinstance(k, bool) or isinstance(n, bool):
        raise DomainError("counts must be integers")
    if int(k) != k or int(n) != n:
        raise DomainError(f"counts must be integers, got k={k!r}, n={n!r}")
    if n < 1 or not 0 <= k <= n:
        raise DomainError(f"need n >= 1 and 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


@lru_cache(maxsize=65536)
def _cp_lower(k: int, n: int, alpha: float) -> float:
    j = np.arange(k, n + 1, dtype=np.float64)
    log_binom = gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0)
    log_alpha = math.log(alpha)

    def log_tail(p: float) -> float:
        # log Pr[Binomial(n, p) >= k]
        return float(logsumexp(log_binom + j * math.log(p) + (n - j) * math.log1p(-p)))

    lo, hi = 0.0, 1.0
    while hi - lo > CP_TOL:
        mid = 0.5 * (lo + hi)
        if log_tail(mid) <= log_alpha:
            lo = mid
        else:
            hi = mid
    return lo


def clopper_pearson_lower(k: int, n: int, alpha: float) -> float:
    """One-sided exact lower confidence bound on a binomial proportion.

    Returns the largest ``p`` with ``Pr[Binomial(n, p) >= k] <= alpha``, found
    by bisection (tolerance 1e-12) on the binomial upper tail summed in log
    space. The bound holds with probability at least ``1 - alpha``.

    Parameters
    ----------
    k : int
        Observed successes, ``0 <= k <= n``.
    n : int
        Number of trials, ``n >= 1``.
    alpha : float
        Failure probability in (0, 1).
    """
    _check_counts(k, n, alpha)
    if k == 0:
        return 0.0
    return _cp_lower(int(k), int(n), float(alpha))


def certified_radius(sigma: float, pa_lower: float) -> float:
    """``sigma * Phi^{-1}(pa_lower)``, or 0 when ``pa_lower <= 0.5``."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    if not 0.0 <= pa_lower < 1.0:
        raise DomainError(f"pa_lower must lie in [0, 1), got {pa_lower!r}")
    if pa_lower <= 0.5:
        return 0.0
    return sigma * normal_quantile(min(pa_lower, PA_CLAMP))


def radius_from_tail(sigma: float, tail: float) -> float:
    """Radius for a top-class probability given by its complement ``1 - p``.

    Avoids the cancellation in ``1 - p`` when ``p`` is within a few ulps of 1,
    which matters for exact analytic probabilities.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    if tail >= 0.5:
        return 0.0
    tail = max(tail, np.finfo(float).tiny)
    return -sigma * normal_quantile(tail)
