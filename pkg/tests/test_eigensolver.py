import numpy as np
import pytest

from pqsteklov import (
    InfeasibleDirectionError,
    InvalidArgumentError,
    SolverConfig,
    UnsupportedProblemError,
    compute_lambda1,
    generate_interval,
    nehari_scale,
    reduced_energy,
    solve,
    solve_direct,
    solve_nehari,
)
from pqsteklov.eigensolver import INFEASIBLE, NOT_FOUND, nehari_scale_factor
from pqsteklov.functionals import J_lambda, L_lambda, constraint_value, grad_J_lambda
from pqsteklov.verify import weak_form_residual

from conftest import uniform
from oracles import boundary_eigenfunction, boundary_lambda1


@pytest.fixture(scope="module")
def neumann(interval100):
    spec = uniform(interval100, 3, 2, 1, 0)
    return spec, compute_lambda1(interval100, spec).lambda1


@pytest.fixture(scope="module")
def boundary_nehari(interval100):
    return uniform(interval100, 2, 3, 0, 1)


def test_scale_factor_examples():
    assert nehari_scale_factor(1.0, 1.0, 2, 3) == 1.0
    assert nehari_scale_factor(1.0, 4.0, 2, 4) == pytest.approx(0.5)
    with pytest.raises(InfeasibleDirectionError):
        nehari_scale_factor(1.0, -0.1, 2, 3)


def test_nehari_scale_rejects_zero(interval2):
    with pytest.raises(InvalidArgumentError):
        nehari_scale(interval2, uniform(interval2, 2, 3), 5.0, np.zeros(3))


def test_reduced_energy_scale_invariance(interval100, boundary_nehari):
    rng = np.random.default_rng(2)
    checked = 0
    x = interval100.nodes[:, 0]
    for _ in range(20):
        u = x - 0.5 + 1e-4 * rng.normal(size=x.size)
        phi = reduced_energy(interval100, boundary_nehari, 8.0, u)
        if np.isfinite(phi):
            assert reduced_energy(interval100, boundary_nehari, 8.0, 3 * u) == pytest.approx(phi, rel=1e-12)
            checked += 1
    assert checked > 0


def test_direct_above_threshold(interval100, neumann):
    spec, l1 = neumann
    res = solve_direct(interval100, spec, 2 * l1)
    assert res.converged and res.regime == "direct"
    assert res.weak_residual <= 1e-7
    assert res.energy < 0
    assert res.constraint_residual <= 1e-10
    u = res.eigenfunction
    assert np.ptp(u) > 1e-8 * np.abs(u).max()
    assert weak_form_residual(interval100, spec, 2 * l1, u) == pytest.approx(res.weak_residual, rel=1e-6)


def test_direct_below_threshold(interval100, neumann):
    spec, l1 = neumann
    res = solve_direct(interval100, spec, 0.5 * l1)
    assert res.status == NOT_FOUND and res.eigenfunction is None
    assert res.restart_status == [NOT_FOUND] * SolverConfig().n_restarts


def test_direct_at_zero(interval100, neumann):
    spec, _ = neumann
    assert solve_direct(interval100, spec, 0.0).status == NOT_FOUND


def test_nehari_above_threshold(interval100, boundary_nehari):
    lam = 8.0
    res = solve_nehari(interval100, boundary_nehari, lam)
    assert res.converged and res.regime == "nehari"
    u = res.eigenfunction
    scale = res.J_p + res.J_q
    assert abs(L_lambda(interval100, boundary_nehari, lam, u)) <= 1e-9 * scale
    e = J_lambda(interval100, boundary_nehari, lam, u)
    assert abs(e - (3 - 2) / (2 * 3) * res.J_p) <= 1e-10 * abs(e)
    assert e > 0


def test_nehari_below_threshold(interval100, boundary_nehari):
    res = solve_nehari(interval100, boundary_nehari, 2.0)
    assert res.status == INFEASIBLE
    assert set(res.restart_status) == {INFEASIBLE}


@pytest.mark.parametrize("p, q, lam", [(2, 3, 8.0), (3, 2, 4.0), (4, 2.5, 10.0), (1.5, 3, 6.0)])
def test_boundary_eigenfunction_closed_form(interval100, p, q, lam):
    spec = uniform(interval100, p, q, 0, 1)
    res = solve(interval100, spec, lam)
    assert res.converged
    exact = boundary_eigenfunction(interval100.nodes[:, 0], lam, p, q)
    u = res.eigenfunction * np.sign(res.eigenfunction[-1])
    np.testing.assert_allclose(u, exact, atol=1e-8 * np.abs(exact).max())


def test_solve_at_zero_is_constant(interval100, neumann):
    spec, _ = neumann
    res = solve(interval100, spec, 0.0)
    np.testing.assert_array_equal(res.eigenfunction, 1.0)
    assert res.weak_residual == 0.0 and res.converged and res.regime == "constant"


def test_solve_rejects_bad_input(interval2):
    class Equal:
        p = q = 2.0
        a, b = np.ones(2), np.zeros(2)

    with pytest.raises(UnsupportedProblemError):
        solve(interval2, Equal(), 1.0)
    with pytest.raises(InvalidArgumentError):
        solve(interval2, uniform(interval2, 2, 3), -1.0)


def test_dispatch(interval100):
    assert solve(interval100, uniform(interval100, 3, 2, 0, 1), 4.0).regime == "direct"
    assert solve(interval100, uniform(interval100, 2, 3, 0, 1), 8.0).regime == "nehari"


@pytest.mark.parametrize("p, q", [(3, 2), (2, 3)])
def test_threshold_itself_is_not_an_eigenvalue(interval100, p, q):
    spec = uniform(interval100, p, q, 0, 1)
    l1 = compute_lambda1(interval100, spec).lambda1
    assert solve(interval100, spec, l1).status in (INFEASIBLE, NOT_FOUND)


def test_converged_pairs_satisfy_weak_form_and_cone(interval100, neumann):
    spec, l1 = neumann
    res = solve(interval100, spec, 1.5 * l1)
    u = res.eigenfunction
    g = grad_J_lambda(interval100, spec, 1.5 * l1, u)
    a = grad_J_lambda(interval100, spec, 0.0, u)
    assert np.linalg.norm(g) <= SolverConfig().residual_tol * np.linalg.norm(a)
    assert abs(constraint_value(interval100, spec, u)) <= 1e-12 * np.abs(u).max()
    assert abs(res.J_p + res.J_q - 1.5 * l1 * res.B) <= 1e-9 * (res.J_p + res.J_q)


def test_eigenfunctions_depend_on_p():
    m = generate_interval(60)
    out = []
    for p in (1.5, 2.0):
        spec = uniform(m, p, 3, 1, 0)
        l1 = compute_lambda1(m, spec).lambda1
        out.append((l1, solve(m, spec, 1.2 * l1)))
    assert out[0][0] == out[1][0]
    assert out[0][1].converged and out[1][1].converged
    assert not np.allclose(np.abs(out[0][1].eigenfunction), np.abs(out[1][1].eigenfunction))


def test_solve_is_thread_independent(interval100, neumann):
    spec, l1 = neumann
    a = solve(interval100, spec, 3 * l1, SolverConfig(threads=1))
    b = solve(interval100, spec, 3 * l1, SolverConfig(threads=4))
    np.testing.assert_array_equal(a.eigenfunction, b.eigenfunction)
    assert a.restart_status == b.restart_status


def test_boundary_threshold_oracle_consistency():
    assert boundary_lambda1(3) == 4.0 and boundary_lambda1(2) == 2.0
