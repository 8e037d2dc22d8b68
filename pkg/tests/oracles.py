"""Independent reference computations used to freeze expected values.

None of these call into certsmooth.
"""

import math


def phi_series(z: float, terms: int = 200) -> float:
    """Standard normal CDF from the Maclaurin series of erf (fine for |z| <= 6)."""
    x = z / math.sqrt(2.0)
    total, term = 0.0, x
    for k in range(terms):
        total += term / (2 * k + 1)
        term *= -x * x / (k + 1)
    return 0.5 + total / math.sqrt(math.pi)


def bisect(f, lo: float, hi: float, tol: float = 1e-14) -> float:
    """Root of an increasing function on [lo, hi]."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def quantile_oracle(p: float) -> float:
    return bisect(lambda z: phi_series(z) - p, -8.0, 8.0)


def binom_upper_tail(k: int, n: int, p: float) -> float:
    """Pr[Binomial(n, p) >= k] by direct summation with exact integer binomials."""
    return sum(math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(k, n + 1))


def cp_lower_oracle(k: int, n: int, alpha: float) -> float:
    if k == 0:
        return 0.0
    return bisect(lambda p: binom_upper_tail(k, n, p) - alpha, 0.0, 1.0, tol=1e-12)
