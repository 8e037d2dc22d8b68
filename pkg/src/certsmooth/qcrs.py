"""Per-input sigma selection by momentum-guided binary search.

The sigma-radius curve ``R(sigma)`` of a smoothed classifier is, for most
inputs, strictly quasiconcave: the sign of its slope alone says on which
side of the optimum a probe lies. :func:`qcrs_search` bisects on that sign,
uses a +/-1 momentum to walk through flat ``R = 0`` stretches, and finally
keeps the default sigma unless the optimized one does better.

Objectives are callables ``objective(sigma, seed) -> radius``; see
:class:`MonteCarloRadius` (the production path), :class:`ExactRadius`
(analytic models) and :class:`CurveObjective` (deterministic test curves).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .certify import estimate_radius
from .models import BaseModel, exact_tail, forward_passes
from .rng import derive_seed
from .stats import radius_from_tail

SIGMA_FLOOR = 1e-4

# published search regions keyed by the sigma the base model was trained with
SEARCH_REGIONS = {0.12: (0.08, 0.50), 0.25: (0.15, 0.70), 0.50: (0.25, 1.00)}


def search_region(sigma0: float) -> tuple[float, float]:
    """Default ``(sigma_min, sigma_max)`` for a model trained at ``sigma0``."""
    for key, region in SEARCH_REGIONS.items():
        if math.isclose(sigma0, key):
            return region
    return 0.6 * sigma0, 2.8 * sigma0


@dataclass(frozen=True)
class QcrsParams:
    sigma_min: float = 0.15
    sigma_max: float = 0.70
    epsilon: float = 0.01
    tau: float = 0.05
    grad_samples: int = 500
    sigma0: float = 0.25
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        if not 0 < self.epsilon < self.sigma_max - self.sigma_min:
            raise ValueError("epsilon must be positive and below the search width")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.grad_samples < 1:
            raise ValueError("grad_samples must be at least 1")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")

    @classmethod
    def for_sigma0(cls, sigma0: float, **overrides) -> "QcrsParams":
        lo, hi = search_region(sigma0)
        return replace(cls(sigma_min=lo, sigma_max=hi, sigma0=sigma0), **overrides)

    @property
    def iterations(self) -> int:
        return max(0, math.ceil(math.log2((self.sigma_max - self.sigma_min) / self.epsilon)))


# -- objectives ------------------------------------------------------------


class MonteCarloRadius:
    """``estimate_radius`` with a fixed sample budget, as an objective.

    ``label=None`` scores the plurality class at each sigma (what the
    optimizer uses); a fixed label traces that class's curve.
    """

    def __init__(self, model: BaseModel, x, n_samples: int = 500, alpha: float = 0.001,
                 label: int | None = None):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        self.n_samples = int(n_samples)
        self.alpha = float(alpha)
        self.label = label

    def __call__(self, sigma: float, seed: int = 0) -> float:
        return estimate_radius(self.model, self.x, sigma, self.n_samples, self.alpha, seed,
                               self.label)


class ExactRadius:
    """``sigma * Phi^{-1}(p(sigma))`` with the exact class probability.

    ``label`` defaults to the base prediction at ``x``.
    """

    def __init__(self, model: BaseModel, x, label: int | None = None):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        self.label = model.classify(self.x) if label is None else int(label)

    def __call__(self, sigma: float, seed: int = 0) -> float:
        return radius_from_tail(sigma, exact_tail(self.model, self.x, sigma, self.label))


class CurveObjective:
    """Wrap a deterministic ``R(sigma)``; the seed is ignored."""

    def __init__(self, fn: Callable[[float], float]):
        self.fn = fn

    def __call__(self, sigma: float, seed: int = 0) -> float:
        return float(self.fn(sigma))


# -- gradient sign -----------------------------------------------------------


def gradient_difference(objective, sigma: float, tau: float, seed: int, t: int = 0) -> float:
    """``R(sigma + tau) - R(sigma - tau)`` with per-side derived seeds.

    The lower probe is floored at ``SIGMA_FLOOR``; probes are not clipped to
    the search region.
    """
    upper = objective(sigma + tau, derive_seed(seed, t, "+"))
    lower = objective(max(sigma - tau, SIGMA_FLOOR), derive_seed(seed, t, "-"))
    return upper - lower


def gradient_sign(objective, sigma: float, tau: float, seed: int, t: int = 0) -> int:
    diff = gradient_difference(objective, sigma, tau, seed, t)
    return int(np.sign(diff))


# -- optimizer -------------------------------------------------------------


@dataclass
class Iteration:
    t: int
    sigma_t: float
    diff: float
    grad_sign: int
    momentum: int
    lo: float
    hi: float


@dataclass
class OptTrace:
    sigma_min: float
    sigma_max: float
    iterations: list[Iteration] = field(default_factory=list)
    sigma_hat: float = math.nan
    sigma0: float = math.nan
    radius_hat: float = math.nan
    radius0: float = math.nan
    chosen_sigma: float = math.nan
    rejected: bool = False
    forward_passes: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OptTrace":
        d = dict(d)
        d["iterations"] = [Iteration(**it) for it in d.get("iterations", [])]
        return cls(**d)


def qcrs_search(objective, params: QcrsParams) -> tuple[float, OptTrace]:
    """Bisect on the slope sign of ``objective`` and apply the rejection step.

    Returns the chosen sigma and the full trace. After iteration ``t`` the
    bracket has width ``(sigma_max - sigma_min) / 2**t``; under a (1,1)
    strict-quasiconcavity condition the optimum stays inside it.
    """
    start = forward_passes()
    trace = OptTrace(params.sigma_min, params.sigma_max, sigma0=params.sigma0)
    lo, hi = params.sigma_min, params.sigma_max
    momentum = 0
    t = 0
    while hi - lo > params.epsilon:
        t += 1
        sigma = 0.5 * (lo + hi)
        diff = gradient_difference(objective, sigma, params.tau, params.seed, t)
        sign = int(np.sign(diff))
        if sign > 0:
            lo, momentum = sigma, 1
        elif sign < 0:
            hi, momentum = sigma, -1
        elif momentum >= 0:
            hi, momentum = sigma, -1
        else:
            lo, momentum = sigma, 1
        trace.iterations.append(Iteration(t, sigma, diff, sign, momentum, lo, hi))

    sigma_hat = 0.5 * (lo + hi)
    r_hat = objective(sigma_hat, derive_seed(params.seed, "reject", "hat"))
    r0 = objective(params.sigma0, derive_seed(params.seed, "reject", "base"))
    trace.sigma_hat, trace.radius_hat, trace.radius0 = sigma_hat, r_hat, r0
    trace.rejected = not r_hat > r0
    trace.chosen_sigma = params.sigma0 if trace.rejected else sigma_hat
    trace.forward_passes = forward_passes() - start
    return trace.chosen_sigma, trace


def qcrs_optimize(model: BaseModel, x, params: QcrsParams = QcrsParams(),
                  alpha: float = 0.001, label: int | None = None) -> tuple[float, OptTrace]:
    """Optimize sigma for one input using ``grad_samples``-draw radius estimates.

    The radius is scored for one class throughout, ``label`` or by default
    the base prediction at ``x``. Scoring whichever class leads at each
    sigma would let the search climb towards a large sigma where a
    different class takes over.
    """
    label = model.classify(x) if label is None else label
    return qcrs_search(MonteCarloRadius(model, x, params.grad_samples, alpha, label), params)


def grid_search(objective, sigmas: Sequence[float], seed: int = 0) -> tuple[float, np.ndarray]:
    """Evaluate ``objective`` on every sigma; return the argmax and the curve.

    Ties go to the smaller sigma.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim != 1 or sigmas.size == 0:
        raise ValueError("sigmas must be a non-empty 1-d sequence")
    if np.any(np.diff(sigmas) <= 0) or sigmas[0] <= 0:
        raise ValueError("sigmas must be positive and strictly increasing")
    radii = np.array([objective(s, derive_seed(seed, "grid", i)) for i, s in enumerate(sigmas)])
    return float(sigmas[int(np.argmax(radii))]), radii
