"""Eigenfunctions for a prescribed eigenvalue ``lam > lambda1``.

Two routes, chosen by the ordering of the exponents:

* ``p > q`` (*direct*): minimize ``J_lambda`` over the cone ``C``. The start
  is a cone direction with quotient below ``lam``, scaled along its ray to the
  point of negative energy, so the descent can never settle on ``u = 0``.
* ``p < q`` (*nehari*): minimize ``Phi(u) = J_lambda(t(u) u)`` over cone
  directions, where ``t(u)`` is the closed-form scaling onto the Nehari set,
  and report ``t(u) u``.

Both routes first look for a feasible direction (``J_q(u) < lam B(u)``) by
descending the q-quotient. When every restart fails to find one the answer
is ``infeasible``/``not_found``: the quotient is bounded below by the
computed threshold on the whole cone, so no nonzero eigenfunction exists.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cone import _is_degenerate, _shift, constraint_scale, random_cone_point
from .descent import SolverConfig, descend, polish, reduce_hessian, restart_seed, run_restarts
from .errors import (
    GenerationFailureError,
    InfeasibleDirectionError,
    InvalidArgumentError,
    SingularGradientError,
    UnsupportedProblemError,
)
from .functionals import (
    grad_energy,
    grad_grad_energy,
    hess_grad_energy,
    node_weights,
    signed_power,
)
from .mesh import Mesh
from .rayleigh import RayleighObjective

__all__ = [
    "EigenResult",
    "nehari_scale",
    "nehari_scale_factor",
    "reduced_energy",
    "solve_direct",
    "solve_nehari",
    "solve",
    "CONVERGED",
    "INFEASIBLE",
    "NOT_FOUND",
    "NOT_CONVERGED",
]

log = logging.getLogger(__name__)

CONVERGED = "converged"
INFEASIBLE = "infeasible"
NOT_FOUND = "not_found"
NOT_CONVERGED = "not_converged"


@dataclass
class EigenResult:
    """Outcome of one eigenvalue solve.

    ``weak_residual`` is ``|grad J_lambda(u)| / |A(u)|`` where ``A(u)`` is the
    assembled gradient part of the weak form; ``constraint_residual`` is
    ``|I(u)|`` relative to ``sum(W) max|u|^(q-1)``. ``nehari_gap`` is
    ``|L_lambda(u)|`` and is only meaningful in the nehari regime.
    """

    lam: float
    eigenfunction: np.ndarray | None
    status: str
    regime: str
    weak_residual: float = float("nan")
    constraint_residual: float = float("nan")
    energy: float = float("nan")
    nehari_gap: float = float("nan")
    J_p: float = float("nan")
    J_q: float = float("nan")
    B: float = float("nan")
    best_restart: int = -1
    restart_status: list[str] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def nehari_scale_factor(jp: float, denom: float, p: float, q: float) -> float:
    """``(jp / denom)^(1/(q-p))`` with ``denom = lam B - J_q``."""
    if not denom > 0:
        raise InfeasibleDirectionError(f"lam*B - J_q = {denom!r} <= 0")
    if not jp > 0:
        raise InvalidArgumentError("J_p vanishes: constant fields are not on the Nehari set")
    return (jp / denom) ** (1.0 / (q - p))


def nehari_scale(mesh: Mesh, spec, lam: float, u) -> float:
    """Positive ``t`` with ``L_lambda(t u) = 0``.

    The same formula gives the minimizer of ``J_lambda`` along the ray when
    ``p > q``.
    """
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise InvalidArgumentError("u = 0 has no Nehari scaling")
    b = float(node_weights(mesh, spec) @ np.abs(u) ** spec.q)
    return nehari_scale_factor(
        grad_energy(mesh, u, spec.p), lam * b - grad_energy(mesh, u, spec.q), spec.p, spec.q
    )


def reduced_energy(mesh: Mesh, spec, lam: float, u) -> float:
    """``Phi(u) = ((q-p)/(pq)) t(u)^p J_p(u)``, ``+inf`` off the feasible set."""
    try:
        t = nehari_scale(mesh, spec, lam, u)
    except InfeasibleDirectionError:
        return float("inf")
    p, q = spec.p, spec.q
    return (q - p) / (p * q) * t**p * grad_energy(mesh, u, p)


# -- objectives ---------------------------------------------------------------


class _EnergyParts:
    def __init__(self, mesh: Mesh, spec, lam: float, shift_tol: float):
        self.mesh = mesh
        self.p, self.q = float(spec.p), float(spec.q)
        self.lam = float(lam)
        self.weights = node_weights(mesh, spec)
        self.shift_tol = shift_tol
        self.ones = np.ones(mesh.n_nodes)

    def b(self, x):
        return float(self.weights @ np.abs(x) ** self.q)

    def gb(self, x):
        return self.q * self.weights * signed_power(x, self.q - 1.0)

    def _mag(self, x, eps):
        if self.q < 2.0:
            return (x * x + max(eps, 1e-10) ** 2) ** ((self.q - 2.0) / 2.0)
        return np.abs(x) ** (self.q - 2.0)

    def hb_diag(self, x, eps):
        return self.q * (self.q - 1.0) * self.weights * self._mag(x, eps)

    def shift_gradient(self, x, eps):
        return (self.q - 1.0) * self.weights * self._mag(x, eps)

    def defect(self, v, eps):
        """(gradient of J_lambda, gradient-term part A) at ``v``."""
        a = grad_grad_energy(self.mesh, v, self.p, eps) / self.p
        a += grad_grad_energy(self.mesh, v, self.q, eps) / self.q
        return a - self.lam * self.gb(v) / self.q, a

    def relative_residual(self, v, eps=1e-10):
        g, a = self.defect(v, eps)
        na = np.linalg.norm(a)
        return float(np.linalg.norm(g) / na) if na > 0 else float(np.linalg.norm(g))

    def eps_schedule(self, cfg: SolverConfig) -> list[float]:
        return cfg.smoothing.schedule() if min(self.p, self.q) < 2.0 else [0.0]


class DirectObjective(_EnergyParts):
    """``J_lambda`` on the cone; iterates are shifted but never rescaled."""

    def value(self, x):
        return (
            grad_energy(self.mesh, x, self.p) / self.p
            + grad_energy(self.mesh, x, self.q) / self.q
            - self.lam * self.b(x) / self.q
        )

    def gradient(self, x, eps):
        return self.defect(x, eps)[0]

    def hessian(self, x, eps):
        h = hess_grad_energy(self.mesh, x, self.p, eps).toarray() / self.p
        h += hess_grad_energy(self.mesh, x, self.q, eps).toarray() / self.q
        h[np.diag_indices_from(h)] -= self.lam * self.hb_diag(x, eps) / self.q
        return reduce_hessian(h, self.shift_gradient(x, eps))

    def retract(self, x):
        return _shift(self.weights, self.q, x, self.shift_tol).shifted

    def stationarity(self, x, grad):
        a = grad_grad_energy(self.mesh, x, self.p, 1e-10) / self.p
        a += grad_grad_energy(self.mesh, x, self.q, 1e-10) / self.q
        na = np.linalg.norm(a)
        return float(np.linalg.norm(grad) / na) if na > 0 else float("inf")

    def null_directions(self, x):
        return (self.ones,)


class NehariObjective(_EnergyParts):
    """``log Phi(u)``, ``Phi(u) = J_lambda(t(u) u)``, over cone directions at ``B = 1``.

    The logarithm has the same minimizers as ``Phi`` and turns its barrier at
    ``lam B = J_q`` into a logarithmic one, which Newton steps handle well.
    """

    def __init__(self, mesh, spec, lam, shift_tol, margin):
        super().__init__(mesh, spec, lam, shift_tol)
        self.margin = margin
        self.alpha = self.q / (self.q - self.p)
        self.beta = self.p / (self.q - self.p)
        self.log_c = np.log((self.q - self.p) / (self.p * self.q))

    def _parts(self, x):
        jp = grad_energy(self.mesh, x, self.p)
        jq = grad_energy(self.mesh, x, self.q)
        lb = self.lam * self.b(x)
        return jp, jq, lb - jq, lb

    def _feasible(self, jp, d, lb):
        return jp > 0 and d > self.margin * lb

    def scale(self, x) -> float:
        jp, _, d, lb = self._parts(x)
        if not self._feasible(jp, d, lb):
            raise InfeasibleDirectionError("direction left the feasible set")
        return nehari_scale_factor(jp, d, self.p, self.q)

    def value(self, x):
        jp, _, d, lb = self._parts(x)
        if not self._feasible(jp, d, lb):
            return float("inf")
        return self.log_c + self.alpha * np.log(jp) - self.beta * np.log(d)

    def _grad_parts(self, x, eps):
        jp, jq, d, lb = self._parts(x)
        gp = grad_grad_energy(self.mesh, x, self.p, eps)
        gq = grad_grad_energy(self.mesh, x, self.q, eps)
        gd = self.lam * self.gb(x) - gq
        return jp, d, gp, gd, self.alpha * gp / jp - self.beta * gd / d

    def gradient(self, x, eps):
        return self._grad_parts(x, eps)[-1]

    def hessian(self, x, eps):
        jp, d, gp, gd, _ = self._grad_parts(x, eps)
        hp = hess_grad_energy(self.mesh, x, self.p, eps).toarray()
        hd = -hess_grad_energy(self.mesh, x, self.q, eps).toarray()
        hd[np.diag_indices_from(hd)] += self.lam * self.hb_diag(x, eps)
        h = self.alpha * (hp / jp - np.outer(gp, gp) / jp**2) - self.beta * (
            hd / d - np.outer(gd, gd) / d**2
        )
        return reduce_hessian(h, self.shift_gradient(x, eps))

    def retract(self, x):
        v = _shift(self.weights, self.q, x, self.shift_tol).shifted
        if _is_degenerate(self.weights, self.q, v):
            return None
        return v / self.b(v) ** (1.0 / self.q)

    def stationarity(self, x, grad):
        try:
            t = self.scale(x)
        except (InfeasibleDirectionError, InvalidArgumentError):
            return float("inf")
        return self.relative_residual(t * x)

    def null_directions(self, x):
        return (self.ones, x)


# -- solvers ------------------------------------------------------------------


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise InvalidArgumentError(f"lambda must be finite and >= 0, got {lam}")
    return lam


def _feasible_direction(mesh, spec, lam, cfg: SolverConfig, restart: int):
    """Cone direction with ``J_q(u) < lam B(u)`` found by quotient descent, or None."""
    try:
        x0 = random_cone_point(mesh, spec, restart_seed(cfg.seed, restart), cfg.shift_tol)
    except GenerationFailureError:
        return None
    ray = RayleighObjective(mesh, spec, cfg.shift_tol)
    target = lam * (1.0 - cfg.warm_start_gap)
    res = descend(
        ray, x0, cfg, ray.eps_schedule(cfg), cfg.polish_tol,
        stop_early=lambda x, f: f <= target,
    )
    if res.value < lam * (1.0 - cfg.feasibility_margin):
        return res.x
    return None


def _finish(mesh, spec, lam, v, regime, cfg: SolverConfig, parts: _EnergyParts) -> EigenResult:
    p, q = parts.p, parts.q
    jp, jq, b = grad_energy(mesh, v, p), grad_energy(mesh, v, q), parts.b(v)
    try:
        g, a = parts.defect(v, 0.0)
    except SingularGradientError:
        g, a = parts.defect(v, cfg.smoothing.epsilon_min)
    na = np.linalg.norm(a)
    resid = float(np.linalg.norm(g) / na) if na > 0 else float(np.linalg.norm(g))
    scale = constraint_scale(parts.weights, q, v)
    ival = abs(float(parts.weights @ signed_power(v, q - 1.0)))
    energy = jp / p + jq / q - lam * b / q
    spread = float(v.max() - v.min())
    ok = resid <= cfg.residual_tol and spread > 1e-8 * float(np.max(np.abs(v)))
    if regime == "direct":
        ok = ok and energy < 0
    else:
        ok = ok and energy > 0
    return EigenResult(
        lam=lam,
        eigenfunction=v,
        status=CONVERGED if ok else NOT_CONVERGED,
        regime=regime,
        weak_residual=resid,
        constraint_residual=ival / scale if scale > 0 else ival,
        energy=energy,
        nehari_gap=abs(-jp - jq + lam * b),
        J_p=jp,
        J_q=jq,
        B=b,
    )


def _pick(results: list[EigenResult | None], lam, regime, empty_status) -> EigenResult:
    statuses = [r.status if r is not None else empty_status for r in results]
    found = [i for i, r in enumerate(results) if r is not None]
    if not found:
        return EigenResult(lam, None, empty_status, regime, restart_status=statuses)
    good = [i for i in found if results[i].converged]
    pool = good or found
    key = (lambda i: results[i].energy) if good else (lambda i: results[i].weak_residual)
    best = pool[0]
    for i in pool[1:]:
        if key(i) < key(best) - 1e-12 * abs(key(best)):
            best = i
    res = results[best]
    res.best_restart = best
    res.restart_status = statuses
    return res


def solve_direct(mesh: Mesh, spec, lam: float, cfg: SolverConfig | None = None) -> EigenResult:
    """Minimize ``J_lambda`` over ``C`` (requires ``p > q``).

    Returns status ``not_found`` when no restart reaches a direction with
    quotient below ``lam``; for ``lam <= 0`` that is immediate, since the
    quotient is positive on ``C \\ {0}``.
    """
    cfg = cfg or SolverConfig()
    lam = _check_lambda(lam)
    if not spec.p > spec.q:
        raise InvalidArgumentError("solve_direct needs p > q")
    if lam == 0.0:
        return EigenResult(lam, None, NOT_FOUND, "direct", restart_status=[NOT_FOUND] * cfg.n_restarts)
    obj = DirectObjective(mesh, spec, lam, cfg.shift_tol)
    schedule = obj.eps_schedule(cfg)

    def run(i):
        u = _feasible_direction(mesh, spec, lam, cfg, i)
        if u is None:
            return None
        v0 = nehari_scale(mesh, spec, lam, u) * u
        res = descend(obj, v0, cfg, schedule, cfg.polish_tol, use_patience=False)
        v = polish(obj, res.x, schedule[-1], cfg.polish_tol)
        # polish is monotone in stationarity; only reject a real energy increase
        if obj.value(v) > res.value + 1e-12 * abs(res.value):
            v = res.x
        return _finish(mesh, spec, lam, v, "direct", cfg, obj)

    return _pick(run_restarts(run, cfg.n_restarts, cfg.threads), lam, "direct", NOT_FOUND)


def solve_nehari(mesh: Mesh, spec, lam: float, cfg: SolverConfig | None = None) -> EigenResult:
    """Minimize ``J_lambda`` on the Nehari set through its scale-free reduction (``p < q``)."""
    cfg = cfg or SolverConfig()
    lam = _check_lambda(lam)
    if not spec.p < spec.q:
        raise InvalidArgumentError("solve_nehari needs p < q")
    if lam == 0.0:
        return EigenResult(lam, None, INFEASIBLE, "nehari", restart_status=[INFEASIBLE] * cfg.n_restarts)
    obj = NehariObjective(mesh, spec, lam, cfg.shift_tol, cfg.feasibility_margin)
    schedule = obj.eps_schedule(cfg)

    def run(i):
        u = _feasible_direction(mesh, spec, lam, cfg, i)
        if u is None:
            return None
        res = descend(obj, u, cfg, schedule, cfg.polish_tol, use_patience=False)
        x = polish(obj, res.x, schedule[-1], cfg.polish_tol)
        if not np.isfinite(obj.value(x)):
            x = res.x
        return _finish(mesh, spec, lam, obj.scale(x) * x, "nehari", cfg, obj)

    return _pick(run_restarts(run, cfg.n_restarts, cfg.threads), lam, "nehari", INFEASIBLE)


def solve(mesh: Mesh, spec, lam: float, cfg: SolverConfig | None = None) -> EigenResult:
    """Eigenfunction for ``lam``: constants at 0, otherwise the route set by ``p`` vs ``q``."""
    cfg = cfg or SolverConfig()
    lam = _check_lambda(lam)
    if spec.p == spec.q:
        raise UnsupportedProblemError("p = q is excluded by hypothesis (h_pq)")
    if lam == 0.0:
        u = np.ones(mesh.n_nodes)
        b = float(node_weights(mesh, spec) @ u)
        return EigenResult(
            lam=0.0, eigenfunction=u, status=CONVERGED, regime="constant",
            weak_residual=0.0, energy=0.0, J_p=0.0, J_q=0.0, B=b,
        )
    if spec.p > spec.q:
        return solve_direct(mesh, spec, lam, cfg)
    return solve_nehari(mesh, spec, lam, cfg)
