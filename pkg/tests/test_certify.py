import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from certsmooth.certify import (
    ABSTAIN,
    CertOutcome,
    CertParams,
    certify,
    estimate_radius,
    estimate_radius_details,
)
from certsmooth.models import (
    Ball,
    BallModel,
    CompositeModel,
    LinearModel,
    constant_model,
    forward_passes,
    sample_class_counts,
)
from certsmooth.stats import certified_radius, clopper_pearson_lower

# frozen from tests/oracles.py (quantile_oracle at alpha^(1/n))
CP_ALL_100 = 0.933254300796991
Z_ALL_100 = 1.500475024120636
Z_ALL_500 = 2.2051862345554873
BALL_RADIUS_02_05 = 0.7650466120013544  # 0.5 * Phi^-1(Phi(1.6) - Phi(-2.4))


def test_params_defaults_and_validation():
    p = CertParams()
    assert (p.alpha, p.n0, p.n) == (0.001, 100, 100_000)
    for bad in ({"alpha": 0.0}, {"alpha": 1.0}, {"n0": 0}, {"n": 0}):
        with pytest.raises(ValueError):
            CertParams(**bad)


def test_constant_classifier_certificate():
    out = certify(constant_model(1, num_classes=2), [0.0], 0.25, CertParams(0.001, 100, 100, seed=3))
    assert out.certified and out.label == 1
    assert out.pa_lower == pytest.approx(CP_ALL_100, abs=1e-9)
    assert out.radius == pytest.approx(0.25 * Z_ALL_100, abs=1e-8)
    assert out.forward_passes == 200


def test_boundary_point_abstains():
    m = LinearModel([1.0, 0.0], 0.0)
    abstains = sum(not certify(m, [0.0, 0.3], 0.5, CertParams(n=10_000, seed=s)).certified
                   for s in range(200))
    assert abstains == 200


def test_ball_radius_near_exact():
    out = certify(BallModel([0.0], 1.0), [0.2], 0.5, CertParams(seed=1))
    assert out.certified and out.label == 1
    assert abs(out.radius - BALL_RADIUS_02_05) <= 0.02
    assert out.radius <= BALL_RADIUS_02_05


def test_forward_pass_accounting_matches_counter():
    before = forward_passes()
    out = certify(BallModel([0.0], 1.0), [0.3], 0.4, CertParams(n0=37, n=4321, seed=2))
    assert out.forward_passes == forward_passes() - before == 37 + 4321


def test_abstain_outcome_shape():
    out = certify(BallModel([0.0], 1.0), [3.0], 5.0, CertParams(n=2000, seed=0))
    # far outside a tiny ball at huge sigma: outside class certifies, inside never does
    assert out.label in (0, ABSTAIN)
    ab = CertOutcome.abstain(0.42, 10)
    assert not ab.certified and ab.radius == 0.0
    d = ab.to_dict()
    assert d["status"] == "abstain" and d["label"] is None


def test_selection_ties_break_to_lowest_index(monkeypatch):
    mod = sys.modules["certsmooth.certify"]  # the package re-exports a function of that name
    monkeypatch.setattr(mod, "sample_class_counts",
                        lambda model, x, sigma, n, seed: np.array([0, n // 2, 0, n - n // 2]))
    out = certify(constant_model(0, num_classes=4), [0.0], 0.3, CertParams(n0=10, n=10))
    assert out.label == ABSTAIN and out.pa_lower < 0.5
    assert estimate_radius_details(constant_model(0, num_classes=4), [0.0], 0.3, 10)[0] == 1


def test_pinned_label_scores_that_class():
    m = CompositeModel([Ball([0.0], 1.0, 2)], default_label=0)
    assert estimate_radius_details(m, [0.0], 1e-6, 50, seed=0)[0] == 2
    top, _, r = estimate_radius_details(m, [0.0], 1e-6, 50, seed=0, label=0)
    assert top == 0 and r == 0.0


def test_abstain_iff_lower_bound_at_most_half():
    m = BallModel([0.0], 1.0)
    for seed, x in enumerate(np.linspace(0.5, 1.3, 17)):
        out = certify(m, [x], 0.6, CertParams(n=3000, seed=seed))
        assert out.certified == (out.pa_lower > 0.5)
        if out.certified:
            assert out.radius > 0


@given(st.integers(0, 10_000), st.floats(1e-4, 0.2), st.floats(1e-4, 0.2))
@settings(max_examples=40, deadline=None)
def test_radius_monotone_in_alpha_for_fixed_samples(seed, a, b):
    lo, hi = sorted((a, b))
    m = BallModel([0.0], 1.0)
    r_lo = certify(m, [0.4], 0.5, CertParams(lo, 50, 2000, seed)).radius
    r_hi = certify(m, [0.4], 0.5, CertParams(hi, 50, 2000, seed)).radius
    assert r_hi >= r_lo


def test_certify_is_pure():
    m = BallModel([0.0, 0.0], 1.0)
    a = certify(m, [0.1, 0.2], 0.3, CertParams(n=5000, seed=8))
    b = certify(m, [0.1, 0.2], 0.3, CertParams(n=5000, seed=8))
    assert a == b


def test_certify_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        certify(BallModel([0.0], 1.0), [0.0, 0.0], 0.3)


def test_soundness_small():
    # emitted radius may exceed the exact one in at most alpha + 3 sqrt(alpha / N) of runs
    m = BallModel([0.0], 1.0)
    exact = BALL_RADIUS_02_05
    alpha, runs = 0.05, 400
    over = sum(certify(m, [0.2], 0.5, CertParams(alpha, 50, 2000, s)).radius > exact
               for s in range(runs))
    assert over / runs <= alpha + 3 * math.sqrt(alpha / runs)


# -- estimate_radius -----------------------------------------------------------


def test_estimate_radius_constant_classifier():
    r = estimate_radius(constant_model(0), [0.0], 0.3, n_est=500, alpha=0.001, seed=0)
    assert r == pytest.approx(0.3 * Z_ALL_500, abs=1e-9)


def test_estimate_radius_zero_in_abstain_regime():
    m = BallModel([0.0], 1.0)
    # exact inside probability at x=1.5, sigma=0.5 is about 0.16
    zeros = sum(estimate_radius(m, [1.5], 0.5, 500, seed=s, label=1) == 0.0 for s in range(300))
    assert zeros == 300


def test_estimate_radius_linear_scales_consistently():
    m = LinearModel([1.0], -0.2)
    x = [0.5]  # margin 0.3
    r1 = np.mean([estimate_radius(m, x, 0.2, 500, seed=s) for s in range(40)])
    r2 = np.mean([estimate_radius(m, x, 0.4, 500, seed=s) for s in range(40)])
    # both sit below the constant exact curve and shrink as p drops
    assert 0.0 < r2 < r1 <= 0.3


def test_estimate_radius_matches_manual_pipeline():
    m = BallModel([0.0], 1.0)
    top, p, r = estimate_radius_details(m, [0.3], 0.4, 777, 0.01, seed=5)
    counts = sample_class_counts(m, [0.3], 0.4, 777, 5)
    assert top == int(np.argmax(counts))
    assert p == clopper_pearson_lower(int(counts[top]), 777, 0.01)
    assert r == certified_radius(0.4, p)
