import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from certsmooth import rng
from certsmooth.models import (
    Ball,
    BallModel,
    CompositeModel,
    HalfSpace,
    LinearModel,
    brute_force_pa,
    constant_model,
    exact_pa,
    exact_tail,
    forward_passes,
    model_from_dict,
    sample_class_counts,
)
from certsmooth.stats import certified_radius, radius_from_tail

from .oracles import phi_series

# frozen from tests/oracles.py
PHI_2 = 0.9772498680518207
BALL_P_02_05 = 0.9370031723758461  # Phi(1.6) - Phi(-2.4)
TAIL_BALL_0_01 = 1.523970604832105e-23  # 2 Phi(-10), mpmath erfc at 50 digits


def test_frozen_values_match_oracle():
    assert phi_series(2.0) == pytest.approx(PHI_2, abs=1e-13)
    assert phi_series(1.6) - phi_series(-2.4) == pytest.approx(BALL_P_02_05, abs=1e-13)


# -- sampling ----------------------------------------------------------------


def test_constant_classifier_counts():
    counts = sample_class_counts(constant_model(2, num_classes=3), [0.7], 0.25, 100, seed=1)
    assert counts.tolist() == [0, 0, 100]


def test_linear_sampling_rate():
    m = LinearModel([1.0, 0.0], 0.0)
    counts = sample_class_counts(m, [0.8, 0.0], 0.4, 100_000, seed=3)
    assert counts.sum() == 100_000
    assert counts[1] / 100_000 == pytest.approx(PHI_2, abs=0.005)


def test_ball_sampling_rate():
    m = BallModel([0.0], 1.0)
    counts = sample_class_counts(m, [0.2], 0.5, 100_000, seed=4)
    assert counts[1] / 100_000 == pytest.approx(BALL_P_02_05, abs=0.005)


def test_sampling_is_deterministic_and_seed_sensitive():
    m = BallModel([0.0, 0.0], 1.0)
    a = sample_class_counts(m, [0.5, 0.5], 0.6, 5000, seed=11)
    b = sample_class_counts(m, [0.5, 0.5], 0.6, 5000, seed=11)
    c = sample_class_counts(m, [0.5, 0.5], 0.6, 5000, seed=12)
    assert a.tolist() == b.tolist()
    assert a.tolist() != c.tolist()


def test_draws_are_partition_independent():
    # the first m draws of a longer stream equal a stream of length m
    full = np.concatenate(list(rng.gaussian_chunks(5, 3 * rng.CHUNK + 17, 2)))
    short = np.concatenate(list(rng.gaussian_chunks(5, rng.CHUNK + 3, 2)))
    np.testing.assert_array_equal(full[: rng.CHUNK + 3], short)
    chunk2 = rng.chunk_generator(5, 2).standard_normal((rng.CHUNK, 2))
    np.testing.assert_array_equal(full[2 * rng.CHUNK: 3 * rng.CHUNK], chunk2)


def test_sampling_counts_forward_passes():
    before = forward_passes()
    sample_class_counts(BallModel([0.0], 1.0), [0.0], 0.3, 1234, seed=0)
    assert forward_passes() - before == 1234


@pytest.mark.parametrize("x, n", [([0.1, 0.2], 10), ([0.1], 0), ([0.1], 2.5)])
def test_sampling_rejects_bad_input(x, n):
    with pytest.raises(ValueError):
        sample_class_counts(BallModel([0.0], 1.0), x, 0.3, n, seed=0)


def test_sampling_rejects_bad_sigma():
    with pytest.raises(ValueError):
        sample_class_counts(BallModel([0.0], 1.0), [0.0], 0.0, 10, seed=0)


# -- exact probabilities -----------------------------------------------------


def test_exact_linear():
    m = LinearModel([1.0, 0.0], 0.0)
    assert exact_pa(m, [0.8, 0.0], 0.4, 1) == pytest.approx(PHI_2, abs=1e-12)
    assert exact_pa(m, [0.8, 0.0], 0.4, 0) == pytest.approx(1 - PHI_2, abs=1e-12)


@given(st.floats(0.01, 5.0), st.floats(-3, 3))
def test_exact_linear_on_boundary_is_half(sigma, y):
    m = LinearModel([2.0, -1.0], 0.5)
    x = [(y - 0.5) / 2.0, y]  # w.x + b = 0
    assert exact_pa(m, x, sigma, 1) == pytest.approx(0.5, abs=1e-12)


def test_exact_ball():
    m = BallModel([0.0], 1.0)
    assert exact_pa(m, [0.2], 0.5, 1) == pytest.approx(BALL_P_02_05, abs=1e-12)
    assert exact_pa(m, [0.0], 1e-3, 1) == pytest.approx(1.0, abs=1e-15)


def test_exact_tail_resolves_tiny_complements():
    m = BallModel([0.0], 1.0)
    tail = exact_tail(m, [0.0], 0.1, 1)
    assert tail == pytest.approx(TAIL_BALL_0_01, rel=1e-12)
    assert exact_pa(m, [0.0], 0.1, 1) == 1.0


def test_exact_unsupported_model():
    with pytest.raises(NotImplementedError, match="brute_force_pa"):
        exact_pa(BallModel([0.0, 0.0], 1.0), [0.0, 0.0], 0.5, 1)


def test_exact_composite_first_match():
    # inner ball wins over the outer one; the ring (0.3, 1] is class 2
    m = CompositeModel([Ball([0.0], 0.3, 1), Ball([0.0], 1.0, 2)], default_label=0)
    sigma, t = 0.4, 0.1
    inner = phi_series((0.3 - t) / sigma) - phi_series((-0.3 - t) / sigma)
    outer = phi_series((1.0 - t) / sigma) - phi_series((-1.0 - t) / sigma)
    assert exact_pa(m, [t], sigma, 1) == pytest.approx(inner, abs=1e-12)
    assert exact_pa(m, [t], sigma, 2) == pytest.approx(outer - inner, abs=1e-12)
    assert exact_pa(m, [t], sigma, 0) == pytest.approx(1 - outer, abs=1e-12)


def test_exact_halfspace_region_in_composite():
    m = CompositeModel([HalfSpace([1.0], -0.5, 1)], default_label=0)
    assert exact_pa(m, [0.9], 0.2, 1) == pytest.approx(phi_series(2.0), abs=1e-12)


# -- brute force oracle ------------------------------------------------------


@pytest.mark.parametrize("model, x, sigma, label", [
    (LinearModel([1.0, 0.0], 0.0), [0.8, 0.0], 0.4, 1),
    (BallModel([0.0], 1.0), [0.2], 0.5, 1),
    (CompositeModel([Ball([0.0], 0.3, 1), Ball([0.0], 1.0, 2)]), [0.1], 0.4, 2),
])
def test_brute_force_agrees_with_exact(model, x, sigma, label):
    brute = brute_force_pa(model, x, sigma, label, n_oracle=1_000_000, seed=9)
    assert abs(brute - exact_pa(model, x, sigma, label)) <= 0.002


def test_brute_force_trivial_cases():
    assert brute_force_pa(constant_model(1, num_classes=2), [0.0], 1.0, 1, 10_000) == 1.0
    assert brute_force_pa(CompositeModel([], 0, dimension=3), [0, 0, 0], 1.0, 0, 10_000) == 1.0


def test_brute_force_uses_its_own_stream():
    m = BallModel([0.0], 1.0)
    counts = sample_class_counts(m, [0.5], 0.5, 20_000, seed=0)
    assert brute_force_pa(m, [0.5], 0.5, 1, 20_000, seed=0) != counts[1] / 20_000


# -- analytic invariants -----------------------------------------------------


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3).filter(lambda w: np.linalg.norm(w) > 0.1),
       st.floats(-1, 1), st.floats(0.05, 3.0))
@settings(max_examples=200)
def test_linear_radius_identity(x, w, b, sigma):
    m = LinearModel(w, b)
    margin = m.margin(x)
    label = m.classify(x)
    # below 1e-6 the check is meaningless; above 37 sigma the tail underflows float64
    if not 1e-6 < abs(margin) / sigma < 37:
        return
    r = radius_from_tail(sigma, exact_tail(m, x, sigma, label))
    assert r == pytest.approx(abs(margin), abs=1e-9)


def test_linear_radius_identity_through_probability():
    m = LinearModel([3.0, 4.0], -1.0)
    x = [0.5, 0.3]  # margin (1.5 + 1.2 - 1) / 5 = 0.34
    for sigma in np.linspace(0.1, 1.0, 10):
        assert certified_radius(sigma, exact_pa(m, x, sigma, 1)) == pytest.approx(0.34, abs=1e-9)


@given(st.floats(-0.99, 0.99), st.lists(st.floats(0.05, 3.0), min_size=3, max_size=30, unique=True))
@settings(max_examples=200)
def test_ball_curve_is_unimodal_on_any_grid(t, sigmas):
    # sigma >= 0.05 keeps every tail mass representable in float64
    m = BallModel([0.0], 1.0)
    s = np.sort(sigmas)
    r = np.array([radius_from_tail(v, exact_tail(m, [t], v, 1)) for v in s])
    star = int(np.argmax(r))
    pos = r > 0
    d = np.diff(r)
    # the true curve approaches the margin from below; once it is within
    # rounding of it, neighbouring values differ by at most a few ulps
    ulps = 4 * np.finfo(float).eps * (1.0 - abs(t))
    tie = lambda i: abs(d[i]) <= ulps and np.isclose(r[i], 1.0 - abs(t), rtol=1e-14)
    # rising up to the argmax, falling after it, on R > 0
    assert all(d[i] > 0 or tie(i) for i in range(star) if pos[i])
    assert all(d[i] < 0 or tie(i) for i in range(star, s.size - 1) if pos[i + 1])


# -- config round trip -------------------------------------------------------


@pytest.mark.parametrize("model", [
    LinearModel([1.0, -2.0], 0.25, positive_label=3, negative_label=1),
    BallModel([0.5, 0.5], 0.7, inside_label=0, outside_label=2),
    CompositeModel([Ball([0.0], 0.3, 1), HalfSpace([1.0], 0.2, 2)], default_label=0, num_classes=4),
    constant_model(1, dimension=2, num_classes=3),
])
def test_model_config_round_trip(model):
    again = model_from_dict(model.to_dict())
    assert again.to_dict() == model.to_dict()
    X = np.random.default_rng(0).normal(size=(200, model.dimension))
    np.testing.assert_array_equal(again.classify_batch(X), model.classify_batch(X))


@pytest.mark.parametrize("config", [{"type": "mystery"}, {"type": "composite", "regions": [{"type": "blob"}]}])
def test_model_config_rejects_unknown(config):
    with pytest.raises(ValueError):
        model_from_dict(config)


def test_model_validation():
    with pytest.raises(ValueError):
        LinearModel([0.0, 0.0])
    with pytest.raises(ValueError):
        BallModel([0.0], -1.0)
    with pytest.raises(ValueError):
        CompositeModel([Ball([0.0], 1.0, 1), Ball([0.0, 0.0], 1.0, 1)])


def test_ball_boundary_is_inside():
    m = BallModel([0.0], 1.0)
    assert m.classify([1.0]) == 1
    assert m.classify([1.0 + 1e-12]) == 0
    assert math.isclose(exact_pa(m, [1.0], 1e-9, 1), 0.5, abs_tol=1e-6)
