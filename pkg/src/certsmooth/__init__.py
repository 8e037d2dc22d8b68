"""Randomized-smoothing certification with per-input sigma optimization."""

from .certify import ABSTAIN, CertOutcome, CertParams, certify, estimate_radius
from .diagnostics import (
    SigmaRadiusCurve,
    SqcReport,
    concavity_check,
    convergence_trace_check,
    sample_curve,
    sqc_estimate,
)
from .estimators import QCRSClassifier, RandomizedSmoothingClassifier
from .models import (
    Ball,
    BallModel,
    BaseModel,
    CompositeModel,
    DataPoint,
    HalfSpace,
    LinearModel,
    brute_force_pa,
    constant_model,
    exact_pa,
    forward_passes,
    sample_class_counts,
)
from .qcrs import (
    CurveObjective,
    ExactRadius,
    MonteCarloRadius,
    OptTrace,
    QcrsParams,
    gradient_sign,
    grid_search,
    qcrs_optimize,
    qcrs_search,
)
from .stats import DomainError, certified_radius, clopper_pearson_lower, normal_cdf, normal_quantile

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN", "CertOutcome", "CertParams", "certify", "estimate_radius",
    "SigmaRadiusCurve", "SqcReport", "concavity_check", "convergence_trace_check",
    "sample_curve", "sqc_estimate",
    "QCRSClassifier", "RandomizedSmoothingClassifier",
    "Ball", "BallModel", "BaseModel", "CompositeModel", "DataPoint", "HalfSpace",
    "LinearModel", "brute_force_pa", "constant_model", "exact_pa", "forward_passes",
    "sample_class_counts",
    "CurveObjective", "ExactRadius", "MonteCarloRadius", "OptTrace", "QcrsParams",
    "gradient_sign", "grid_search", "qcrs_optimize", "qcrs_search",
    "DomainError", "certified_radius", "clopper_pearson_lower", "normal_cdf", "normal_quantile",
]
