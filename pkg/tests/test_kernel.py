import numpy as np
import pytest
from hypothesis import given, strategies as st

from l1bp.kernel import soft_threshold, soft_threshold_deriv

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-6, 1e6, allow_nan=False)


@pytest.fixture
def points():
    rng = np.random.default_rng(0)
    return rng.uniform(-10, 10, 10_000), rng.uniform(0.01, 10, 10_000)


def test_examples():
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(2.0, 1.0) == 1.0
    assert soft_threshold(-3.0, 2.0) == -1.0
    assert soft_threshold_deriv(2.0, 4.0) == 0.25
    assert soft_threshold_deriv(0.99, 1.0) == 0.0
    assert soft_threshold_deriv(1.01, 1.0) == 1.0


def test_boundary_is_dead_zone():
    for b in (1.0, -1.0):
        assert soft_threshold(b, 3.0) == 0.0
        assert soft_threshold_deriv(b, 3.0) == 0.0


@pytest.mark.parametrize("a", [0.0, -1.0, np.inf, np.nan])
def test_rejects_bad_curvature(a):
    with pytest.raises(ValueError):
        soft_threshold(2.0, a)
    with pytest.raises(ValueError):
        soft_threshold_deriv(2.0, a)


def test_rejects_nonfinite_field():
    with pytest.raises(ValueError):
        soft_threshold(np.nan, 1.0)


def test_oddness(points):
    b, a = points
    assert np.array_equal(soft_threshold(b, a), -soft_threshold(-b, a))


def test_dead_zone_iff(points):
    b, a = points
    assert np.array_equal(soft_threshold(b, a) == 0, np.abs(b) <= 1)


def test_shrinkage_magnitude(points):
    b, a = points
    np.testing.assert_allclose(np.abs(soft_threshold(b, a)),
                               np.maximum(np.abs(b) - 1, 0) / a, rtol=1e-15, atol=0)


def test_finite_difference(points):
    b, a = points
    keep = np.abs(np.abs(b) - 1) > 1e-3
    b, a = b[keep], a[keep]
    h = 1e-6
    fd = (soft_threshold(b + h, a) - soft_threshold(b - h, a)) / (2 * h)
    assert np.max(np.abs(fd - soft_threshold_deriv(b, a))) < 1e-6


def test_broadcasting_and_scalars():
    out = soft_threshold(np.array([0.0, 2.0, -4.0]), 2.0)
    np.testing.assert_array_equal(out, [0.0, 0.5, -1.5])
    assert soft_threshold_deriv(np.array([0.0, 2.0]), np.array([1.0, 4.0])).tolist() == [0.0, 0.25]
    assert isinstance(soft_threshold(2.0, 1.0), float)


@given(finite, finite, positive)
def test_lipschitz_after_scaling(b1, b2, a):
    lhs = abs(a * soft_threshold(b1, a) - a * soft_threshold(b2, a))
    assert lhs <= abs(b1 - b2) * (1 + 1e-12) + 1e-9


@given(finite, positive)
def test_deriv_is_step_over_a(b, a):
    assert soft_threshold_deriv(b, a) == (1.0 / a if abs(b) > 1 else 0.0)
