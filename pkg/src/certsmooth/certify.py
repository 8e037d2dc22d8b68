"""Monte Carlo certification of a Gaussian-smoothed classifier at fixed sigma."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .models import BaseModel, sample_class_counts
from .rng import derive_seed
from .stats import certified_radius, clopper_pearson_lower

ABSTAIN = -1


@dataclass(frozen=True)
class CertParams:
    """Confidence and sampling budget for one certification call."""

    alpha: float = 0.001
    n0: int = 100
    n: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.n0 < 1 or self.n < 1:
            raise ValueError("n0 and n must be at least 1")


@dataclass(frozen=True)
class CertOutcome:
    label: int
    pa_lower: float
    radius: float
    forward_passes: int

    @property
    def certified(self) -> bool:
        return self.label != ABSTAIN

    @classmethod
    def abstain(cls, pa_lower: float, forward_passes: int) -> "CertOutcome":
        return cls(ABSTAIN, pa_lower, 0.0, forward_passes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = "certified" if self.certified else "abstain"
        d["label"] = self.label if self.certified else None
        return d


def _plurality(counts: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return int(np.argmax(counts))


def certify(model: BaseModel, x, sigma: float, params: CertParams = CertParams()) -> CertOutcome:
    """Two-phase certification.

    ``n0`` draws pick the candidate class, ``n`` fresh draws bound its
    probability from below at confidence ``1 - alpha``. Abstains iff the
    bound is at most 1/2.
    """
    select = sample_class_counts(model, x, sigma, params.n0, derive_seed(params.seed, "select"))
    top = _plurality(select)
    counts = sample_class_counts(model, x, sigma, params.n, derive_seed(params.seed, "estimate"))
    pa_lower = clopper_pearson_lower(int(counts[top]), params.n, params.alpha)
    passes = params.n0 + params.n
    if pa_lower <= 0.5:
        return CertOutcome.abstain(pa_lower, passes)
    return CertOutcome(top, pa_lower, certified_radius(sigma, pa_lower), passes)


def estimate_radius_details(model: BaseModel, x, sigma: float, n_est: int = 500,
                            alpha: float = 0.001, seed: int = 0,
                            label: int | None = None) -> tuple[int, float, float]:
    """Single-phase ``(class, p_lower, radius)`` from ``n_est`` draws.

    The class is the plurality of the same draws unless ``label`` pins it.
    """
    counts = sample_class_counts(model, x, sigma, n_est, seed)
    top = _plurality(counts) if label is None else int(label)
    k = int(counts[top]) if 0 <= top < counts.size else 0
    pa_lower = clopper_pearson_lower(k, n_est, alpha)
    return top, pa_lower, certified_radius(sigma, pa_lower)


def estimate_radius(model: BaseModel, x, sigma: float, n_est: int = 500,
                    alpha: float = 0.001, seed: int = 0, label: int | None = None) -> float:
    """Cheap radius estimate used to compare sigmas; not a certificate.

    Selection and estimation share the same ``n_est`` draws, so the value is
    only meaningful for ranking candidate sigmas. Pass ``label`` to track one
    class along a sigma-radius curve instead of whichever class leads.
    """
    return estimate_radius_details(model, x, sigma, n_est, alpha, seed, label)[2]
