import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from pqsteklov import (
    InvalidProblemError,
    ProblemSpec,
    SingularGradientError,
    SmoothingConfig,
    generate_interval,
    generate_unit_square,
)
from pqsteklov.eigensolver import nehari_scale
from pqsteklov.functionals import (
    J_lambda,
    J_mu,
    L_lambda,
    constraint_value,
    grad_energy,
    grad_grad_energy,
    grad_J_lambda,
    grad_weighted_qnorm,
    hess_grad_energy,
    hess_J_lambda,
    node_weights,
    validate_problem,
    weighted_qnorm,
)

from conftest import uniform

M20 = generate_interval(20)
SQ3 = generate_unit_square(3)

fields20 = arrays(np.float64, M20.n_nodes, elements=st.floats(-5, 5))
exponents = st.floats(1.1, 5.0)


def central_difference(f, u, h=1e-6):
    g = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (f(u + e) - f(u - e)) / (2 * h)
    return g


# -- ProblemSpec validation ----------------------------------------------------


@pytest.mark.parametrize("p, q", [(2, 2), (1.0, 2), (2, 0.5), (np.inf, 2)])
def test_h_pq_rejected(interval2, p, q):
    with pytest.raises(InvalidProblemError, match=r"\(h_pq\)"):
        uniform(interval2, p, q)


@pytest.mark.parametrize("a, b", [(0.0, 0.0), (-1.0, 1.0), (1.0, -0.5)])
def test_h_ab_rejected(interval2, a, b):
    with pytest.raises(InvalidProblemError, match=r"\(h_ab\)"):
        uniform(interval2, 2, 3, a, b)


def test_weights_must_match_mesh(interval2):
    spec = ProblemSpec(2, 3, [1.0], [0.0, 1.0])
    with pytest.raises(InvalidProblemError):
        node_weights(interval2, spec)


def test_validate_problem_accepts_duck_typed_specs(interval2):
    class Raw:
        p, q, a, b = 2.0, 3.0, np.zeros(2), np.zeros(2)

    with pytest.raises(InvalidProblemError, match=r"\(h_ab\)"):
        validate_problem(interval2, Raw())


def test_smoothing_schedule():
    assert SmoothingConfig().schedule() == pytest.approx([1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10])
    assert SmoothingConfig(1e-8, 0.5, 1e-8).schedule() == [1e-8]


# -- worked examples -------------------------------------------------------------


def test_grad_energy_examples(interval2):
    x = interval2.nodes[:, 0]
    for r in (1.3, 2.0, 4.5):
        assert grad_energy(interval2, x, r) == pytest.approx(1.0, rel=1e-14)
    assert grad_energy(interval2, np.full(3, 7.0), 3) == 0.0
    assert grad_energy(interval2, [0.0, 1.0, 0.0], 3) == pytest.approx(8.0, rel=1e-14)


def test_weighted_qnorm_examples(interval2):
    assert weighted_qnorm(interval2, uniform(interval2, 3, 2, 1, 0), np.ones(3)) == pytest.approx(1.0)
    assert weighted_qnorm(interval2, uniform(interval2, 3, 2, 0, 1), [-0.5, 0, 0.5]) == pytest.approx(0.5)
    assert weighted_qnorm(interval2, uniform(interval2, 3, 2, 1, 1), np.zeros(3)) == 0.0


def test_constraint_value_examples(interval2):
    assert constraint_value(interval2, uniform(interval2, 3, 2, 1, 1), np.zeros(3)) == 0.0
    assert constraint_value(interval2, uniform(interval2, 3, 2, 1, 0), [0, 1, 2]) == pytest.approx(1.0)
    c = 0.37
    assert constraint_value(interval2, uniform(interval2, 2, 3, 0, 1), [-c, 0, c]) == 0.0


def test_J_lambda_examples(interval2):
    spec = uniform(interval2, 4, 2, 0, 1)
    assert J_lambda(interval2, spec, 1.0, np.zeros(3)) == 0.0
    assert J_lambda(interval2, spec, 1.0, [-0.5, 0.0, 0.5]) == pytest.approx(0.5, rel=1e-14)
    spec = uniform(interval2, 3, 2, 1, 0)
    c = 1.7
    assert J_lambda(interval2, spec, 2.0, np.full(3, c)) == pytest.approx(-(2.0 / 2) * c**2)


def test_J_mu_drops_the_p_term(interval2):
    spec = uniform(interval2, 4, 2, 0, 1)
    u = np.array([-0.5, 0.0, 0.5])
    assert J_mu(interval2, spec, 1.0, u) == pytest.approx(0.5 - 0.25)


def test_grad_J_lambda_zero_field(interval2):
    spec = uniform(interval2, 3, 2, 1, 1)
    np.testing.assert_array_equal(grad_J_lambda(interval2, spec, 1.5, np.zeros(3), smoothing=1e-6), 0.0)


def test_L_lambda_examples(interval2):
    spec = uniform(interval2, 3, 2, 1, 0)
    assert L_lambda(interval2, spec, 2.0, np.zeros(3)) == 0.0
    assert L_lambda(interval2, spec, 2.0, np.full(3, 0.5)) == pytest.approx(2.0 * 0.25)


def test_singular_gradient_needs_smoothing(interval2):
    u = np.array([0.0, 0.0, 1.0])  # first element is flat
    with pytest.raises(SingularGradientError):
        grad_grad_energy(interval2, u, 1.5)
    assert np.all(np.isfinite(grad_grad_energy(interval2, u, 1.5, 1e-8)))


# -- properties --------------------------------------------------------------------


@given(u=fields20, r=exponents, t=st.floats(0.01, 100))
def test_grad_energy_homogeneity(u, r, t):
    assert grad_energy(M20, t * u, r) == pytest.approx(t**r * grad_energy(M20, u, r), rel=1e-12, abs=1e-300)


@given(u=fields20, q=exponents, t=st.floats(0.01, 100))
def test_weight_term_homogeneity(u, q, t):
    spec = uniform(M20, 3.0 if q != 3.0 else 2.0, q, 1.0, 0.5)
    assert weighted_qnorm(M20, spec, t * u) == pytest.approx(t**q * weighted_qnorm(M20, spec, u), rel=1e-12, abs=1e-300)
    i1, it = constraint_value(M20, spec, u), constraint_value(M20, spec, t * u)
    scale = t ** (q - 1) * node_weights(M20, spec) @ np.abs(u) ** (q - 1)
    assert abs(it - t ** (q - 1) * i1) <= 1e-12 * scale + 1e-300


@given(u=fields20, q=exponents)
def test_constraint_is_odd(u, q):
    spec = uniform(M20, 3.0 if q != 3.0 else 2.0, q, 0.3, 2.0)
    assert constraint_value(M20, spec, -u) == -constraint_value(M20, spec, u)


@given(u=fields20, q=exponents, s=st.floats(-3, 3), delta=st.floats(1e-3, 1))
def test_shift_map_strictly_increasing(u, q, s, delta):
    spec = uniform(M20, 3.0 if q != 3.0 else 2.0, q, 0.0, 1.0)
    assert constraint_value(M20, spec, u + s + delta) > constraint_value(M20, spec, u + s)


@given(c=st.floats(-10, 10), r=exponents)
def test_constants_are_annihilated(c, r):
    u = np.full(M20.n_nodes, c)
    assert grad_energy(M20, u, r) == 0.0
    np.testing.assert_array_equal(grad_grad_energy(M20, u, r, 1e-8), 0.0)


@given(u=fields20, lam=st.floats(0, 50))
def test_constant_direction_pairing(u, lam):
    spec = uniform(M20, 3, 2.5, 1.0, 0.5)
    g = grad_J_lambda(M20, spec, lam, u, smoothing=1e-8)
    scale = lam * node_weights(M20, spec) @ np.abs(u) ** 1.5 + 1e-300
    assert abs(g.sum() + lam * constraint_value(M20, spec, u)) <= 1e-12 * max(scale, np.abs(g).sum())


@pytest.mark.parametrize("mesh", [M20, SQ3], ids=["1d", "2d"])
@pytest.mark.parametrize("p, q", [(3, 2), (1.5, 3), (2, 3), (3, 1.5), (1.3, 1.8)])
def test_finite_differences(mesh, p, q):
    rng = np.random.default_rng(7)
    spec = uniform(mesh, p, q, 1.0, 0.7)
    lam = 2.3
    for _ in range(3):
        u = rng.uniform(-1, 1, mesh.n_nodes)
        pairs = [
            (lambda v: J_lambda(mesh, spec, lam, v), grad_J_lambda(mesh, spec, lam, u, smoothing=1e-8)),
            (lambda v: grad_energy(mesh, v, p), grad_grad_energy(mesh, u, p, 1e-8)),
            (lambda v: weighted_qnorm(mesh, spec, v), grad_weighted_qnorm(mesh, spec, u)),
        ]
        for f, g in pairs:
            fd = central_difference(f, u)
            assert np.linalg.norm(fd - g) <= 1e-5 * np.linalg.norm(g)


@pytest.mark.parametrize("p, q", [(3, 2), (2.5, 4), (1.5, 3)])
def test_hessian_matches_gradient_differences(p, q):
    rng = np.random.default_rng(3)
    spec = uniform(SQ3, p, q, 1.0, 1.0)
    u = rng.uniform(-1, 1, SQ3.n_nodes)
    h = hess_J_lambda(SQ3, spec, 1.7, u, smoothing=1e-8).toarray()
    fd = np.column_stack([
        (grad_J_lambda(SQ3, spec, 1.7, u + e, 1e-8) - grad_J_lambda(SQ3, spec, 1.7, u - e, 1e-8)) / 2e-6
        for e in 1e-6 * np.eye(SQ3.n_nodes)
    ])
    assert np.linalg.norm(fd - h) <= 1e-5 * np.linalg.norm(h)
    np.testing.assert_allclose(h, h.T, atol=1e-12 * np.abs(h).max())


def test_hess_grad_energy_kills_constants():
    u = np.random.default_rng(1).normal(size=SQ3.n_nodes)
    h = hess_grad_energy(SQ3, u, 3.0)
    assert np.abs(h @ np.ones(SQ3.n_nodes)).max() <= 1e-12 * abs(h).max()


@given(u=fields20, lam=st.floats(1, 50))
def test_L_lambda_vanishes_after_nehari_scaling(u, lam):
    spec = uniform(M20, 2.0, 3.0, 1.0, 1.0)
    jq = grad_energy(M20, u, 3.0)
    if not (lam * weighted_qnorm(M20, spec, u) - jq > 1e-6 * jq and grad_energy(M20, u, 2.0) > 1e-8):
        return
    t = nehari_scale(M20, spec, lam, u)
    v = t * u
    scale = grad_energy(M20, v, 2.0) + grad_energy(M20, v, 3.0)
    assert abs(L_lambda(M20, spec, lam, v)) <= 1e-12 * scale
