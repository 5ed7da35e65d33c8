import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from minksob.errors import DimensionMismatch
from minksob.lorentz import (
    CausalClass, boost, causal_class, gram_schmidt, mink_inner, mink_norm, rotation, unit_ball_volume,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("a, b, expected", [
    ((1, 0), (1, 0), -1.0),
    ((0, 1), (0, 1), 1.0),
    ((1, 1), (1, 1), 0.0),
])
def test_mink_inner_examples(a, b, expected):
    assert mink_inner(np.array(a, float), np.array(b, float)) == expected


def test_mink_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        mink_inner(np.zeros(3), np.zeros(4))


@pytest.mark.parametrize("v, expected", [
    ((2, 1), CausalClass.TIMELIKE),
    ((1, 2), CausalClass.SPACELIKE),
    ((1, 1), CausalClass.LIGHTLIKE),
])
def test_causal_class_examples(v, expected):
    assert causal_class(np.array(v, float)) == expected


def test_causal_class_is_scale_invariant():
    v = np.array([1.0, 1.0 + 1e-13])
    assert causal_class(v) == causal_class(1e8 * v) == CausalClass.LIGHTLIKE


@pytest.mark.parametrize("v, expected", [((1, 0), 1.0), ((0, 3), 3.0), ((1, 1), 0.0)])
def test_mink_norm_examples(v, expected):
    assert mink_norm(np.array(v, float)) == pytest.approx(expected)


@pytest.mark.parametrize("k, expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_unit_ball_volume(k, expected):
    assert unit_ball_volume(k) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("k", [0, -1, 1.5])
def test_unit_ball_volume_rejects(k):
    with pytest.raises(ValueError):
        unit_ball_volume(k)


def _unit_timelike(v, sign):
    v = np.asarray(v, float)
    t = math.sqrt(1 + v @ v)
    return np.concatenate([[sign * t], v])


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite), st.sampled_from([1, -1]))
def test_reverse_cauchy_schwarz(a, b, sign):
    u, v = _unit_timelike(a, sign), _unit_timelike(b, sign)
    assert mink_inner(u, v) <= -1 + 1e-9 * (1 + abs(u[0] * v[0]))


@settings(max_examples=50)
@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite),
       st.floats(-0.95, 0.95), st.integers(1, 3))
def test_boost_invariance(a, b, vel, axis):
    L = boost(3, vel, axis=axis)
    scale = 1 + np.abs(a) @ np.abs(b)
    assert abs(mink_inner(L @ a, L @ b) - mink_inner(a, b)) <= 1e-12 * scale * 10


@given(arrays(float, 3, elements=finite), st.floats(-1e3, 1e3))
def test_norm_homogeneous(v, lam):
    assert mink_norm(lam * v) == pytest.approx(abs(lam) * mink_norm(v), rel=1e-9, abs=1e-9)


def test_rotation_preserves_metric():
    R = rotation(3, 0.7, axes=(1, 3))
    eta = np.diag([-1.0, 1, 1, 1])
    np.testing.assert_allclose(R.T @ eta @ R, eta, atol=1e-14)


def test_gram_schmidt_orthonormal():
    basis = gram_schmidt(np.array([[0.0, 1, 0.5], [0.0, 0, 1], [1.0, 0, 0]]))
    G = mink_inner(basis[:, None, :], basis[None, :, :])
    np.testing.assert_allclose(G, np.diag([1.0, 1.0, -1.0]), atol=1e-12)
