"""Empirical checks on sigma-radius curves.

A ``quasiconcave=True`` verdict only means the grid did not refute strict
quasiconcavity; ``False`` is a definite counterexample on that grid.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .certify import estimate_radius_details
from .models import BaseModel, exact_pa, exact_tail
from .qcrs import ExactRadius, OptTrace, gradient_sign
from .rng import derive_seed
from .stats import radius_from_tail


@dataclass
class SigmaRadiusCurve:
    sigmas: np.ndarray
    radii: np.ndarray
    pa_lower: np.ndarray
    source: str = "exact"
    n: int | None = None

    def __post_init__(self) -> None:
        self.sigmas = np.asarray(self.sigmas, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)
        self.pa_lower = np.asarray(self.pa_lower, dtype=float)
        if not (self.sigmas.shape == self.radii.shape == self.pa_lower.shape):
            raise ValueError("sigmas, radii and pa_lower must have equal length")
        if np.any(np.diff(self.sigmas) <= 0):
            raise ValueError("sigmas must be strictly increasing")
        if np.any(self.radii < 0):
            raise ValueError("radii must be non-negative")

    def argmax(self) -> int:
        return int(np.argmax(self.radii))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sigma", "radius", "pa_lower"])
        for row in zip(self.sigmas, self.radii, self.pa_lower):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def sample_curve(model: BaseModel, x, sigmas: Sequence[float], n: int = 100_000,
                 seed: int = 0, alpha: float = 0.001, exact: bool = False,
                 label: int | None = None) -> SigmaRadiusCurve:
    """Radius at each sigma, by Monte Carlo (``n`` draws each) or exactly.

    The curve follows one class, ``label``, defaulting to the base
    prediction at ``x``. The exact variant reports the exact class
    probability in the ``pa_lower`` column and needs a model with a closed
    form.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.size < 2:
        raise ValueError("need at least two sigmas")
    radii, pas = [], []
    label = model.classify(x) if label is None else label
    if exact:
        for s in sigmas:
            radii.append(radius_from_tail(s, exact_tail(model, x, s, label)))
            pas.append(exact_pa(model, x, s, label))
        return SigmaRadiusCurve(sigmas, radii, pas, "exact")
    for i, s in enumerate(sigmas):
        _, p, r = estimate_radius_details(model, x, s, n, alpha, derive_seed(seed, "curve", i),
                                          label)
        radii.append(r)
        pas.append(p)
    return SigmaRadiusCurve(sigmas, radii, pas, "mc", n)


def concavity_check(curve: SigmaRadiusCurve, tol: float | None = None) -> bool:
    """True iff every three-point second divided difference is ``<= tol``.

    ``tol`` defaults to ``1e-6 * max(radius)``. Non-uniform spacing uses the
    standard divided-difference form ``2 * f[x0, x1, x2]``. Each difference
    also gets its own floating-point rounding allowance, so an affine curve
    passes at ``tol=0``.
    """
    s, r = curve.sigmas, curve.radii
    if s.size < 3:
        raise ValueError("concavity check needs at least three samples")
    if tol is None:
        tol = 1e-6 * float(np.max(r))
    h0, h1 = s[1:-1] - s[:-2], s[2:] - s[1:-1]
    second = 2.0 * ((r[2:] - r[1:-1]) / h1 - (r[1:-1] - r[:-2]) / h0) / (h0 + h1)
    rounding = 8 * np.finfo(float).eps * (abs(r[:-2]) + 2 * abs(r[1:-1]) + abs(r[2:])) / (h0 * h1)
    return bool(np.all(second <= tol + rounding))


@dataclass
class SqcReport:
    sigma_star: float
    upsilon_minus: float
    upsilon_plus: float
    quasiconcave: bool
    concave: bool
    n_left: int
    n_right: int
    degenerate: bool = False
    verdict: str = ""
    signs: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _fractions(signs, positions, star, radii):
    n_left = n_right = good_left = good_right = 0
    for s, pos, r in zip(signs, positions, radii):
        if r <= 0 or pos == star:
            continue
        if pos < star:
            n_left += 1
            good_left += s > 0
        else:
            n_right += 1
            good_right += s < 0
    ups_minus = good_left / n_left if n_left else 1.0
    ups_plus = good_right / n_right if n_right else 1.0
    return ups_minus, ups_plus, n_left, n_right


def sqc_estimate(source, sigmas: Sequence[float] | None = None, *, sigma_star: float | None = None,
                 tau: float = 0.05, seed: int = 0, concavity_tol: float | None = None) -> SqcReport:
    """Estimate the (upsilon-, upsilon+) strict-quasiconcavity fractions.

    ``source`` is either a :class:`SigmaRadiusCurve` or an objective
    ``(sigma, seed) -> radius`` evaluated on ``sigmas``. For a sampled curve
    the slope sign at a grid point comes from the adjacent sample towards
    the optimum side (forward difference on the left of ``sigma_star``,
    backward on the right). For an objective it is the ``+/- tau`` probe of
    :func:`gradient_sign`. Only grid points with positive radius count.
    ``sigma_star`` defaults to the grid argmax (ties to the smaller sigma).
    """
    if isinstance(source, SigmaRadiusCurve):
        curve = source
    else:
        if sigmas is None:
            raise ValueError("sigmas are required when sqc_estimate gets an objective")
        s = np.asarray(sigmas, dtype=float)
        r = np.array([source(v, derive_seed(seed, "sqc-curve", i)) for i, v in enumerate(s)])
        curve = SigmaRadiusCurve(s, r, np.full(s.size, math.nan), "objective")
    s, r = curve.sigmas, curve.radii
    star = float(s[curve.argmax()]) if sigma_star is None else float(sigma_star)

    if isinstance(source, SigmaRadiusCurve):
        signs = []
        for i in range(s.size):
            if s[i] < star:
                signs.append(int(np.sign(r[i + 1] - r[i])))
            elif s[i] > star:
                signs.append(int(np.sign(r[i] - r[i - 1])))
            else:
                signs.append(0)
    else:
        signs = [gradient_sign(source, v, tau, derive_seed(seed, "sqc-grad"), i)
                 if r[i] > 0 and v != star else 0 for i, v in enumerate(s)]

    ups_minus, ups_plus, n_left, n_right = _fractions(signs, s, star, r)
    degenerate = not np.any(r > 0)
    quasi = ups_minus == 1.0 and ups_plus == 1.0
    concave = concavity_check(curve, concavity_tol) if s.size >= 3 else True
    verdict = ("degenerate: no certified sigma on grid" if degenerate else
               "not refuted on this grid" if quasi else "refuted: slope-sign violation")
    return SqcReport(star, ups_minus, ups_plus, quasi, concave, n_left, n_right,
                     degenerate, verdict, signs)


class ConvergenceViolation(AssertionError):
    def __init__(self, t: int, error: float, bound: float):
        super().__init__(f"iteration {t}: |sigma_t - sigma*| = {error:.6g} exceeds bound {bound:.6g}")
        self.t, self.error, self.bound = t, error, bound


def convergence_trace_check(trace: OptTrace, sigma_star: float, slack: float = 1e-12) -> list[float]:
    """Check ``|sigma_t - sigma*| <= (sigma_max - sigma_min) / 2**t`` for all ``t``.

    Returns the margins ``bound - error`` per iteration; raises
    :class:`ConvergenceViolation` at the first violating iteration.
    """
    width = trace.sigma_max - trace.sigma_min
    margins = []
    for it in trace.iterations:
        bound = width / 2 ** it.t
        error = abs(it.sigma_t - sigma_star)
        if error > bound + slack:
            raise ConvergenceViolation(it.t, error, bound)
        margins.append(bound - error)
    return margins


def exact_curve(model: BaseModel, x, sigmas: Sequence[float], label: int | None = None):
    """Shorthand for the exact sigma-radius curve of an analytic model."""
    return sample_curve(model, x, sigmas, exact=True, label=label)


__all__ = [
    "SigmaRadiusCurve", "SqcReport", "ConvergenceViolation", "sample_curve", "exact_curve",
    "concavity_check", "sqc_estimate", "convergence_trace_check", "ExactRadius",
]
