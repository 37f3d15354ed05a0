"""Discrete energies, weighted norms and constraint functionals on P1 fields.

A discrete field is a plain ``numpy`` vector of nodal values. Gradient terms
are integrated exactly (P1 gradients are elementwise constant); every
``|u|^q`` and ``|u|^(q-2) u`` integral uses vertex-lumped quadrature, so all
weight terms collapse onto one nodal weight vector (see :func:`node_weights`).

Smoothing ``(|grad u|^2 + eps^2)^((r-2)/2)`` replaces ``|grad u|^(r-2)`` only
inside derivatives and only for exponents ``r < 2``. Energies are always
evaluated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, InvalidProblemError, SingularGradientError
from .mesh import Mesh

__all__ = [
    "ProblemSpec",
    "SmoothingConfig",
    "node_weights",
    "grad_energy",
    "grad_grad_energy",
    "hess_grad_energy",
    "weighted_qnorm",
    "grad_weighted_qnorm",
    "hess_weighted_qnorm",
    "constraint_value",
    "constraint_shift_derivative",
    "J_lambda",
    "J_mu",
    "grad_J_lambda",
    "hess_J_lambda",
    "L_lambda",
    "signed_power",
    "validate_problem",
]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Exponents and piecewise-constant weights of the eigenvalue problem.

    ``a`` holds one value per mesh element, ``b`` one value per boundary
    facet. Construction validates (h_pq) and the sign part of (h_ab); the
    positive-mass part is checked against a mesh in :func:`node_weights`.
    """

    p: float
    q: float
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        if not (p > 1.0 and q > 1.0 and np.isfinite(p) and np.isfinite(q)) or p == q:
            raise InvalidProblemError(
                f"hypothesis (h_pq) violated: need p, q in (1, inf) with p != q, got p={p}, q={q}"
            )
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidProblemError("hypothesis (h_ab) violated: weights must be finite")
        if np.any(a < 0) or np.any(b < 0):
            raise InvalidProblemError("hypothesis (h_ab) violated: weights a, b must be nonnegative")
        if not (np.any(a > 0) or np.any(b > 0)):
            raise InvalidProblemError(
                "hypothesis (h_ab) violated: int_Omega a dx + int_dOmega b dsigma must be > 0"
            )
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def uniform(cls, mesh: Mesh, p: float, q: float, a: float = 1.0, b: float = 0.0) -> "ProblemSpec":
        """Constant weights expanded onto the elements and facets of ``mesh``."""
        return cls(p, q, np.full(mesh.n_elements, float(a)), np.full(mesh.n_facets, float(b)))

    def with_p(self, p: float) -> "ProblemSpec":
        return replace(self, p=p)


@dataclass(frozen=True)
class SmoothingConfig:
    epsilon: float = 1e-4
    continuation_factor: float = 0.1
    epsilon_min: float = 1e-10

    def __post_init__(self):
        if not self.epsilon >= self.epsilon_min >= 0.0:
            raise InvalidArgumentError("need epsilon >= epsilon_min >= 0")
        if not 0.0 < self.continuation_factor < 1.0:
            raise InvalidArgumentError("continuation_factor must lie in (0, 1)")

    def schedule(self) -> list[float]:
        """Decreasing epsilons from ``epsilon`` down to ``epsilon_min`` (inclusive)."""
        eps, out = self.epsilon, []
        while eps > self.epsilon_min * (1 + 1e-12) and eps > 0:
            out.append(eps)
            eps *= self.continuation_factor
        out.append(self.epsilon_min)
        return out


def _eps(smoothing) -> float:
    if smoothing is None:
        return 0.0
    if isinstance(smoothing, SmoothingConfig):
        return smoothing.epsilon
    return float(smoothing)


def _field(mesh: Mesh, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"field has shape {u.shape}, expected ({mesh.n_nodes},)")
    return u


def _check_exponent(r: float) -> float:
    r = float(r)
    if not r > 1.0:
        raise InvalidArgumentError(f"exponent must be > 1, got {r}")
    return r


def signed_power(u: np.ndarray, e: float) -> np.ndarray:
    """``|u|^(e-1) u`` with the continuous value 0 at ``u = 0``."""
    return np.sign(u) * np.abs(u) ** e


def node_weights(mesh: Mesh, spec: ProblemSpec) -> np.ndarray:
    """Lumped nodal weights ``W_v``.

    ``W_v = sum_{K ni v} a_K |K| / (dim+1) + sum_{F ni v} b_F |F| / dim``, so
    ``B(u) = sum_v W_v |u_v|^q`` and ``I(u) = sum_v W_v |u_v|^(q-2) u_v``.
    """
    a, b = np.asarray(spec.a, dtype=float), np.asarray(spec.b, dtype=float)
    if a.shape != (mesh.n_elements,) or b.shape != (mesh.n_facets,):
        raise InvalidProblemError(
            f"weights sized ({a.size}, {b.size}) do not match mesh "
            f"({mesh.n_elements} elements, {mesh.n_facets} facets)"
        )
    w = np.zeros(mesh.n_nodes)
    share = a * mesh.element_measures / (mesh.dim + 1)
    np.add.at(w, mesh.elements, share[:, None])
    if mesh.n_facets:
        share = b * mesh.facet_measures / mesh.dim
        np.add.at(w, mesh.boundary_facets, share[:, None])
    if not w.sum() > 0.0:
        raise InvalidProblemError(
            "hypothesis (h_ab) violated: int_Omega a dx + int_dOmega b dsigma must be > 0"
        )
    return w


def validate_problem(mesh: Mesh, spec) -> None:
    """Check (h_pq) and (h_ab) for any object exposing ``p, q, a, b``.

    :class:`ProblemSpec` already enforces this at construction; the function
    exists for duck-typed specs and loaded configurations.
    """
    p, q = float(spec.p), float(spec.q)
    if not (p > 1.0 and q > 1.0) or p == q or not (np.isfinite(p) and np.isfinite(q)):
        raise InvalidProblemError(
            f"hypothesis (h_pq) violated: need p, q in (1, inf) with p != q, got p={p}, q={q}"
        )
    a, b = np.asarray(spec.a, dtype=float), np.asarray(spec.b, dtype=float)
    if np.any(a < 0) or np.any(b < 0) or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidProblemError("hypothesis (h_ab) violated: weights a, b must be finite and nonnegative")
    node_weights(mesh, spec)


# -- gradient energies ------------------------------------------------------


def grad_energy(mesh: Mesh, u, r: float) -> float:
    """``sum_K |K| |grad u|_K^r``, exact for P1."""
    r = _check_exponent(r)
    g = mesh.gradients(_field(mesh, u))
    norms = np.sqrt(np.einsum("ij,ij->i", g, g))
    return float(mesh.element_measures @ norms**r)


def _flux_coefficient(sq: np.ndarray, r: float, eps: float) -> np.ndarray:
    """Elementwise factor multiplying grad u in the derivative of ``|grad u|^r / r``."""
    if r < 2.0:
        if eps > 0.0:
            return (sq + eps * eps) ** ((r - 2.0) / 2.0)
        if np.any(sq == 0.0):
            raise SingularGradientError(
                f"|grad u|^{r - 2:g} is singular on a flat element; pass a smoothing epsilon"
            )
    return sq ** ((r - 2.0) / 2.0)


def grad_grad_energy(mesh: Mesh, u, r: float, smoothing=None) -> np.ndarray:
    """Partial derivatives of :func:`grad_energy` with respect to nodal values."""
    r = _check_exponent(r)
    g = mesh.gradients(_field(mesh, u))
    coef = _flux_coefficient(np.einsum("ij,ij->i", g, g), r, _eps(smoothing))
    flux = (r * coef * mesh.element_measures)[:, None] * g
    return mesh.gradient_operator.T @ flux.ravel()


def hess_grad_energy(mesh: Mesh, u, r: float, smoothing=None) -> sp.csr_matrix:
    """Sparse Hessian of :func:`grad_energy`.

    For ``r < 2`` a flat element makes the exact Hessian infinite, so the
    smoothed form is always used there (``eps`` defaults to 1e-10).
    """
    r = _check_exponent(r)
    g = mesh.gradients(_field(mesh, u))
    eps = _eps(smoothing)
    if r < 2.0 and eps <= 0.0:
        eps = 1e-10
    sq = np.einsum("ij,ij->i", g, g)
    reg = sq + (eps * eps if r < 2.0 else 0.0)
    base = reg ** ((r - 2.0) / 2.0)
    # d/dg of r*base*g = r*base*(I + (r-2) g g^T / reg)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer_coef = np.where(reg > 0, (r - 2.0) / reg, 0.0)
    dim = mesh.dim
    local = np.eye(dim)[None] + outer_coef[:, None, None] * np.einsum("ki,kj->kij", g, g)
    local *= (r * base * mesh.element_measures)[:, None, None]
    grads = mesh.element_gradients  # (N_e, dim+1, dim)
    ke = np.einsum("kai,kij,kbj->kab", grads, local, grads)
    rows = np.repeat(mesh.elements, dim + 1, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, dim + 1)).ravel()
    h = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
    h.sum_duplicates()
    return h


# -- weight terms -----------------------------------------------------------


def weighted_qnorm(mesh: Mesh, spec: ProblemSpec, u) -> float:
    """``B(u) = int a |u|^q + int_boundary b |u|^q`` by vertex lumping."""
    u = _field(mesh, u)
    return float(node_weights(mesh, spec) @ np.abs(u) ** spec.q)


def grad_weighted_qnorm(mesh: Mesh, spec: ProblemSpec, u) -> np.ndarray:
    u = _field(mesh, u)
    return spec.q * node_weights(mesh, spec) * signed_power(u, spec.q - 1.0)


def hess_weighted_qnorm(mesh: Mesh, spec: ProblemSpec, u, smoothing=None) -> np.ndarray:
    """Diagonal of the Hessian of ``B``; smoothed at zero nodes when ``q < 2``."""
    u = _field(mesh, u)
    q = spec.q
    if q < 2.0:
        eps = max(_eps(smoothing), 1e-10)
        mag = (u * u + eps * eps) ** ((q - 2.0) / 2.0)
    else:
        mag = np.abs(u) ** (q - 2.0)
    return q * (q - 1.0) * node_weights(mesh, spec) * mag


def constraint_value(mesh: Mesh, spec: ProblemSpec, u) -> float:
    """``I(u) = int a |u|^(q-2) u + int_boundary b |u|^(q-2) u``; cone C is ``I = 0``."""
    u = _field(mesh, u)
    return float(node_weights(mesh, spec) @ signed_power(u, spec.q - 1.0))


def constraint_shift_derivative(mesh: Mesh, spec: ProblemSpec, u, smoothing=None) -> np.ndarray:
    """Nodal gradient of ``I``: ``(q-1) W_v |u_v|^(q-2)``, smoothed at zeros for ``q < 2``.

    Its sum is the derivative of ``s -> I(u + s)``.
    """
    u = _field(mesh, u)
    q = spec.q
    if q < 2.0:
        eps = max(_eps(smoothing), 1e-10)
        mag = (u * u + eps * eps) ** ((q - 2.0) / 2.0)
    else:
        mag = np.abs(u) ** (q - 2.0)
    return (q - 1.0) * node_weights(mesh, spec) * mag


# -- J_lambda and friends ---------------------------------------------------


def J_lambda(mesh: Mesh, spec: ProblemSpec, lam: float, u, include_p: bool = True) -> float:
    """Energy ``(1/p) J_p + (1/q) J_q - (lam/q) B``.

    With ``include_p=False`` the p-term is dropped, giving the functional of
    the pure q-Laplacian problem (see :func:`J_mu`).
    """
    u = _field(mesh, u)
    val = grad_energy(mesh, u, spec.q) / spec.q - lam * weighted_qnorm(mesh, spec, u) / spec.q
    if include_p:
        val += grad_energy(mesh, u, spec.p) / spec.p
    return val


def J_mu(mesh: Mesh, spec: ProblemSpec, mu: float, u) -> float:
    return J_lambda(mesh, spec, mu, u, include_p=False)


def grad_J_lambda(
    mesh: Mesh, spec: ProblemSpec, lam: float, u, smoothing=None, include_p: bool = True
) -> np.ndarray:
    """Nodal gradient of :func:`J_lambda`; the discrete weak-form defect."""
    u = _field(mesh, u)
    g = grad_grad_energy(mesh, u, spec.q, smoothing) / spec.q
    g -= lam * node_weights(mesh, spec) * signed_power(u, spec.q - 1.0)
    if include_p:
        g += grad_grad_energy(mesh, u, spec.p, smoothing) / spec.p
    return g


def hess_J_lambda(
    mesh: Mesh, spec: ProblemSpec, lam: float, u, smoothing=None, include_p: bool = True
) -> sp.csr_matrix:
    u = _field(mesh, u)
    h = hess_grad_energy(mesh, u, spec.q, smoothing) / spec.q
    if include_p:
        h = h + hess_grad_energy(mesh, u, spec.p, smoothing) / spec.p
    diag = lam * hess_weighted_qnorm(mesh, spec, u, smoothing) / spec.q
    return (h - sp.diags(diag)).tocsr()


def L_lambda(mesh: Mesh, spec: ProblemSpec, lam: float, u) -> float:
    """``-J_p - J_q + lam B``; zero exactly on the Nehari set."""
    u = _field(mesh, u)
    return (
        -grad_energy(mesh, u, spec.p)
        - grad_energy(mesh, u, spec.q)
        + lam * weighted_qnorm(mesh, spec, u)
    )
