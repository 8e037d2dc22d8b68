"""Base classifiers over real vectors and their exact smoothed probabilities.

Linear and one-dimensional ball/composite models have closed-form Gaussian
measures, which makes them ground-truth oracles for the certifier and the
sigma optimizer. Everything else goes through :func:`brute_force_pa`.
"""

from __future__ import annotations

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .rng import derive_seed, gaussian_chunks
from .stats import normal_cdf


class ForwardPassCounter:
    """Process-wide count of base-classifier evaluations on noisy inputs."""

    def __init__(self) -> None:
        self._value = 0
        self._lock = threading.Lock()

    def add(self, n: int) -> None:
        with self._lock:
            self._value += int(n)

    @property
    def value(self) -> int:
        with self._lock:
            return self._value


FORWARD_PASSES = ForwardPassCounter()


def forward_passes() -> int:
    return FORWARD_PASSES.value


def _vector(x: Any, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class DataPoint:
    id: str
    x: np.ndarray
    label: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _vector(self.x))
        if int(self.label) != self.label or self.label < 0:
            raise ValueError(f"label must be a non-negative integer, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))


class BaseModel(ABC):
    """Deterministic classifier ``f: R^d -> {0, .., num_classes - 1}``."""

    dimension: int
    num_classes: int

    @abstractmethod
    def classify_batch(self, X: np.ndarray) -> np.ndarray:
        """Labels for each row of an ``(m, dimension)`` array."""

    def classify(self, x) -> int:
        return int(self.classify_batch(_vector(x)[None, :])[0])

    def to_dict(self) -> dict:
        raise NotImplementedError


# -- regions ---------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    rho: float
    label: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vector(self.center, "center"))
        if not self.rho > 0:
            raise ValueError("ball radius rho must be positive")

    def contains(self, X: np.ndarray) -> np.ndarray:
        return np.linalg.norm(X - self.center, axis=1) <= self.rho

    def interval(self) -> tuple[float, float]:
        c = float(self.center[0])
        return c - self.rho, c + self.rho

    def to_dict(self) -> dict:
        return {"type": "ball", "center": self.center.tolist(), "rho": self.rho,
                "label": self.label}


@dataclass(frozen=True)
class HalfSpace:
    """``{z : w . z + b >= 0}``."""

    w: np.ndarray
    b: float
    label: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "w", _vector(self.w, "w"))
        if not np.linalg.norm(self.w) > 0:
            raise ValueError("half-space normal w must be nonzero")

    def contains(self, X: np.ndarray) -> np.ndarray:
        return X @ self.w + self.b >= 0

    def interval(self) -> tuple[float, float]:
        w = float(self.w[0])
        cut = -self.b / w
        return (cut, math.inf) if w > 0 else (-math.inf, cut)

    def to_dict(self) -> dict:
        return {"type": "halfspace", "w": self.w.tolist(), "b": self.b, "label": self.label}


# -- models ----------------------------------------------------------------


class LinearModel(BaseModel):
    """``positive_label`` where ``w . z + b >= 0``, else ``negative_label``."""

    def __init__(self, w, b: float = 0.0, positive_label: int = 1, negative_label: int = 0):
        self.w = _vector(w, "w")
        self.b = float(b)
        if not np.linalg.norm(self.w) > 0:
            raise ValueError("LinearModel needs a nonzero weight vector")
        if positive_label == negative_label:
            raise ValueError("positive and negative labels must differ")
        self.positive_label = int(positive_label)
        self.negative_label = int(negative_label)
        self.dimension = self.w.size
        self.num_classes = max(self.positive_label, self.negative_label) + 1

    def classify_batch(self, X):
        return np.where(X @ self.w + self.b >= 0, self.positive_label, self.negative_label)

    def margin(self, x) -> float:
        """Signed distance from ``x`` to the decision boundary."""
        return float((_vector(x) @ self.w + self.b) / np.linalg.norm(self.w))

    def to_dict(self):
        return {"type": "linear", "w": self.w.tolist(), "b": self.b,
                "positive_label": self.positive_label, "negative_label": self.negative_label}


class BallModel(BaseModel):
    """``inside_label`` on the closed ball ``||z - center|| <= rho``."""

    def __init__(self, center, rho: float, inside_label: int = 1, outside_label: int = 0):
        self.ball = Ball(center, float(rho), int(inside_label))
        self.center = self.ball.center
        self.rho = float(rho)
        if inside_label == outside_label:
            raise ValueError("inside and outside labels must differ")
        self.inside_label = int(inside_label)
        self.outside_label = int(outside_label)
        self.dimension = self.center.size
        self.num_classes = max(self.inside_label, self.outside_label) + 1

    def classify_batch(self, X):
        return np.where(self.ball.contains(X), self.inside_label, self.outside_label)

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "rho": self.rho,
                "inside_label": self.inside_label, "outside_label": self.outside_label}


class CompositeModel(BaseModel):
    """First matching region wins; points in no region get ``default_label``."""

    def __init__(self, regions: Sequence[Ball | HalfSpace] = (), default_label: int = 0,
                 dimension: int | None = None, num_classes: int | None = None):
        self.regions = tuple(regions)
        self.default_label = int(default_label)
        dims = {r.center.size if isinstance(r, Ball) else r.w.size for r in self.regions}
        if dimension is not None:
            dims.add(int(dimension))
        if len(dims) != 1:
            raise ValueError("CompositeModel needs one consistent dimension "
                             "(pass dimension= when there are no regions)")
        self.dimension = dims.pop()
        labels = [self.default_label] + [r.label for r in self.regions]
        self.num_classes = max(max(labels) + 1, num_classes or 0)

    def classify_batch(self, X):
        out = np.full(X.shape[0], self.default_label, dtype=np.int64)
        unassigned = np.ones(X.shape[0], dtype=bool)
        for region in self.regions:
            hit = unassigned & region.contains(X)
            out[hit] = region.label
            unassigned &= ~hit
        return out

    def to_dict(self):
        return {"type": "composite", "regions": [r.to_dict() for r in self.regions],
                "default_label": self.default_label, "dimension": self.dimension,
                "num_classes": self.num_classes}


def constant_model(label: int, dimension: int = 1, num_classes: int | None = None) -> CompositeModel:
    return CompositeModel((), default_label=label, dimension=dimension, num_classes=num_classes)


# -- config ----------------------------------------------------------------


def _region_from_dict(d: dict) -> Ball | HalfSpace:
    kind = d.get("type")
    if kind == "ball":
        return Ball(d["center"], float(d["rho"]), int(d["label"]))
    if kind == "halfspace":
        return HalfSpace(d["w"], float(d.get("b", 0.0)), int(d["label"]))
    raise ValueError(f"unknown region type {kind!r}")


def model_from_dict(d: dict) -> BaseModel:
    kind = d.get("type")
    if kind == "linear":
        return LinearModel(d["w"], d.get("b", 0.0), d.get("positive_label", 1),
                           d.get("negative_label", 0))
    if kind == "ball":
        return BallModel(d["center"], d["rho"], d.get("inside_label", 1),
                         d.get("outside_label", 0))
    if kind == "composite":
        return CompositeModel([_region_from_dict(r) for r in d.get("regions", [])],
                              d.get("default_label", 0), d.get("dimension"),
                              d.get("num_classes"))
    raise ValueError(f"unknown model type {kind!r}")


# -- sampling --------------------------------------------------------------


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be positive and finite, got {sigma!r}")
    return sigma


def sample_class_counts(model: BaseModel, x, sigma: float, n: int, seed: int) -> np.ndarray:
    """Class histogram of ``f(x + eps_i)`` over ``n`` draws ``eps_i ~ N(0, sigma^2 I)``.

    Draws are indexed by ``(seed, i)`` through a counter-based generator, so
    the result is a pure function of the arguments. Adds ``n`` to the global
    forward-pass counter.
    """
    x = _vector(x)
    if x.size != model.dimension:
        raise ValueError(f"input has dimension {x.size}, model expects {model.dimension}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    sigma = _check_sigma(sigma)
    counts = np.zeros(model.num_classes, dtype=np.int64)
    for eps in gaussian_chunks(seed, int(n), x.size):
        labels = model.classify_batch(x + sigma * eps)
        counts += np.bincount(labels, minlength=model.num_classes)[: model.num_classes]
    FORWARD_PASSES.add(n)
    return counts


# -- exact probabilities -----------------------------------------------------


def _interval_mass(a: float, b: float, x: float, sigma: float) -> float:
    # N(x, sigma^2) mass of [a, b], computed on the side that avoids cancellation
    lo, hi = (a - x) / sigma, (b - x) / sigma
    if lo >= 0:
        return normal_cdf(-lo) - normal_cdf(-hi)
    return normal_cdf(hi) - normal_cdf(lo)


def _subtract(intervals: list[tuple[float, float]], cut: tuple[float, float]):
    a, b = cut
    out = []
    for lo, hi in intervals:
        if hi <= a or lo >= b:
            out.append((lo, hi))
            continue
        if lo < a:
            out.append((lo, a))
        if hi > b:
            out.append((b, hi))
    return out


def _label_intervals(model: BaseModel) -> dict[int, list[tuple[float, float]]]:
    if isinstance(model, BallModel):
        regions, default = (model.ball,), model.outside_label
    elif isinstance(model, CompositeModel):
        regions, default = model.regions, model.default_label
    else:
        raise TypeError(type(model).__name__)
    free = [(-math.inf, math.inf)]
    parts: dict[int, list[tuple[float, float]]] = {}
    for region in regions:
        a, b = region.interval()
        taken = [(max(lo, a), min(hi, b)) for lo, hi in free if min(hi, b) > max(lo, a)]
        parts.setdefault(region.label, []).extend(taken)
        free = _subtract(free, (a, b))
    parts.setdefault(default, []).extend(free)
    return parts


def _exact_masses(model: BaseModel, x, sigma: float, label: int) -> tuple[float, float]:
    """(p, 1 - p) for ``label`` with each side summed directly."""
    x = _vector(x)
    sigma = _check_sigma(sigma)
    if x.size != model.dimension:
        raise ValueError(f"input has dimension {x.size}, model expects {model.dimension}")
    if isinstance(model, LinearModel):
        s = (x @ model.w + model.b) / (np.linalg.norm(model.w) * sigma)
        pos, neg = normal_cdf(s), normal_cdf(-s)
        if label == model.positive_label:
            return pos, neg
        if label == model.negative_label:
            return neg, pos
        return 0.0, 1.0
    if isinstance(model, (BallModel, CompositeModel)) and model.dimension == 1:
        parts = _label_intervals(model)
        t = float(x[0])
        mass = {lab: sum(_interval_mass(a, b, t, sigma) for a, b in ivs)
                for lab, ivs in parts.items()}
        p = mass.get(label, 0.0)
        rest = sum(m for lab, m in mass.items() if lab != label)
        return min(p, 1.0), min(rest, 1.0)
    raise NotImplementedError(
        f"no closed form for {type(model).__name__} in dimension {model.dimension}; "
        "use brute_force_pa")


def exact_pa(model: BaseModel, x, sigma: float, label: int) -> float:
    """Exact ``Pr[f(x + eps) = label]`` for analytic models.

    Supported: :class:`LinearModel` in any dimension, :class:`BallModel` and
    :class:`CompositeModel` in one dimension. Other models raise
    ``NotImplementedError``; use :func:`brute_force_pa` for them.
    """
    return _exact_masses(model, x, sigma, label)[0]


def exact_tail(model: BaseModel, x, sigma: float, label: int) -> float:
    """``1 - exact_pa`` computed without cancellation."""
    return _exact_masses(model, x, sigma, label)[1]


def brute_force_pa(model: BaseModel, x, sigma: float, label: int,
                   n_oracle: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo estimate of ``Pr[f(x + eps) = label]``.

    Uses a seed stream disjoint from certification streams. The standard
    error is at most ``sqrt(0.25 / n_oracle)``.
    """
    counts = sample_class_counts(model, x, sigma, n_oracle, derive_seed(seed, "oracle"))
    if not 0 <= label < counts.size:
        return 0.0
    return counts[label] / n_oracle
