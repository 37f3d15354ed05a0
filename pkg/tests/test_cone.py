import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from pqsteklov import (
    DegenerateDirectionError,
    InvalidArgumentError,
    generate_interval,
    normalize_to_C1,
    random_cone_point,
    shift_to_cone,
)
from pqsteklov.functionals import constraint_value, node_weights, weighted_qnorm

from conftest import uniform

M30 = generate_interval(30)
fields = arrays(np.float64, M30.n_nodes, elements=st.floats(-10, 10))
qs = st.sampled_from([1.2, 1.5, 2.0, 2.5, 3.0, 4.0])


def _spec(q, a=1.0, b=0.5):
    return uniform(M30, 3.0 if q != 3.0 else 2.0, q, a, b)


def test_linear_case(interval2):
    res = shift_to_cone(interval2, uniform(interval2, 3, 2, 1, 0), [0.0, 1.0, 2.0])
    assert res.shift == pytest.approx(-1.0, abs=1e-14)
    np.testing.assert_allclose(res.shifted, [-1.0, 0.0, 1.0], atol=1e-14)


def test_constant_field_shifts_to_zero(interval2):
    res = shift_to_cone(interval2, uniform(interval2, 3, 2.5, 1, 1), np.full(3, 4.2))
    assert res.shift == -4.2
    np.testing.assert_array_equal(res.shifted, 0.0)


def test_boundary_weight_q_below_two(interval2):
    spec = uniform(interval2, 3, 1.5, 0, 1)
    oracle = brentq(lambda s: np.sign(s) * abs(s) ** 0.5 + np.sign(1 + s) * abs(1 + s) ** 0.5, -1, 0)
    res = shift_to_cone(interval2, spec, [0.0, 0.0, 1.0])
    assert res.shift == pytest.approx(oracle, abs=1e-12)
    assert res.shift == pytest.approx(-0.5, abs=1e-12)


def test_bad_arguments(interval2):
    spec = uniform(interval2, 3, 2)
    with pytest.raises(InvalidArgumentError):
        shift_to_cone(interval2, spec, np.zeros(4))
    with pytest.raises(InvalidArgumentError):
        shift_to_cone(interval2, spec, np.zeros(3), tol=0)


@given(u=fields, q=qs)
def test_shift_lands_on_cone(u, q):
    spec = _spec(q)
    res = shift_to_cone(M30, spec, u)
    # For q < 2, I is arbitrarily steep near nodes that shift to ~0; one ulp
    # of s then moves I by more than the requested tolerance.
    v = res.shifted
    with np.errstate(divide="ignore"):
        slope = (q - 1) * node_weights(M30, spec) @ np.where(v != 0, np.abs(v) ** (q - 2), 0.0)
    floor = 4 * slope * np.spacing(np.abs(u).max() + abs(res.shift))
    assert res.residual <= max(res.tolerance, floor) or res.residual == 0.0
    assert abs(constraint_value(M30, spec, res.shifted)) == pytest.approx(res.residual)


@given(u=fields, q=qs, c=st.floats(-20, 20))
def test_translation_equivariance(u, q, c):
    spec = _spec(q)
    s0 = shift_to_cone(M30, spec, u).shift
    s1 = shift_to_cone(M30, spec, u + c).shift
    assert s1 == pytest.approx(s0 - c, abs=1e-10 * (1 + np.abs(u).max() + abs(c)))


@given(u=fields, q=qs)
def test_idempotence(u, q):
    spec = _spec(q)
    v = shift_to_cone(M30, spec, u).shifted
    assume(np.ptp(v) > 1e-6)
    assert abs(shift_to_cone(M30, spec, v).shift) <= 1e-10 * np.abs(v).max()


@given(u=fields, q=qs, t=st.floats(1e-3, 1e3))
def test_cone_closed_under_positive_scaling(u, q, t):
    spec = _spec(q)
    res = shift_to_cone(M30, spec, u)
    assert abs(constraint_value(M30, spec, t * res.shifted)) <= t ** (q - 1) * max(res.tolerance, res.residual) * 1.0001 + 1e-300


def test_normalize_examples(interval2):
    spec = uniform(interval2, 2, 4, 0, 1)
    c = 8.0**0.25
    u = np.array([-c, 0.0, c])  # B(u) = 2 c^4 = 16
    assert weighted_qnorm(interval2, spec, u) == pytest.approx(16.0)
    np.testing.assert_allclose(normalize_to_C1(interval2, spec, u), u / 2)
    v = u / 2
    np.testing.assert_allclose(normalize_to_C1(interval2, spec, v), v, rtol=1e-15)


def test_normalize_degenerate_and_off_cone():
    m = generate_interval(4)
    spec = uniform(m, 2, 3, 0, 1)
    with pytest.raises(DegenerateDirectionError):
        normalize_to_C1(m, spec, [0.0, 1.0, -1.0, 0.0, 0.0][:5])
    with pytest.raises(InvalidArgumentError):
        normalize_to_C1(m, spec, [1.0, 0.0, 0.0, 0.0, 0.0])


def test_random_cone_point_contract():
    spec = _spec(2.5)
    u = random_cone_point(M30, spec, 11)
    np.testing.assert_array_equal(u, random_cone_point(M30, spec, 11))
    assert not np.array_equal(u, random_cone_point(M30, spec, 12))
    w = node_weights(M30, spec)
    assert abs(constraint_value(M30, spec, u)) <= 1e-12 * w.sum() * np.abs(u).max() ** 1.5
    assert weighted_qnorm(M30, spec, u) == pytest.approx(1.0, abs=1e-12)
