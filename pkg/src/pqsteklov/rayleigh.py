"""Threshold eigenvalue: minimum of the q-gradient Rayleigh quotient over C.

Nothing in this module reads the exponent ``p`` of a problem: the threshold
depends on ``q`` and the weights only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cone import _shift, _is_degenerate, random_cone_point
from .descent import SolverConfig, descend, reduce_hessian, restart_seed, run_restarts
from .errors import GenerationFailureError, InvalidArgumentError, NoFeasibleStartError
from .functionals import (
    grad_energy,
    grad_grad_energy,
    hess_grad_energy,
    node_weights,
    signed_power,
)
from .mesh import Mesh

__all__ = [
    "Lambda1Result",
    "RayleighObjective",
    "rayleigh_quotient",
    "lambda_tilde_quotient",
    "compute_lambda1",
]

log = logging.getLogger(__name__)


@dataclass
class Lambda1Result:
    """Best restart of :func:`compute_lambda1`.

    ``quotient_history`` belongs to the winning restart; ``restart_values``
    holds the final quotient of every restart (``inf`` for degenerate ones).
    """

    lambda1: float
    minimizer: np.ndarray
    restarts_used: int
    quotient_history: list[float]
    converged: bool
    best_restart: int = 0
    restart_values: list[float] = field(default_factory=list)
    stationarity: float = float("nan")


def _nonzero(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise InvalidArgumentError("quotient undefined at u = 0")
    return u


def rayleigh_quotient(mesh: Mesh, spec, u) -> float:
    """``J_q(u) / B(u)``, or ``+inf`` when ``B(u) = 0``."""
    u = _nonzero(u)
    b = float(node_weights(mesh, spec) @ np.abs(u) ** spec.q)
    if b == 0.0:
        return float("inf")
    return grad_energy(mesh, u, spec.q) / b


def lambda_tilde_quotient(mesh: Mesh, spec, u) -> float:
    """``((1/q) J_q + (1/p) J_p) / ((1/q) B)``, or ``+inf`` when ``B(u) = 0``.

    Dominates :func:`rayleigh_quotient` and approaches it along ``t u`` as
    ``t -> inf`` (``p < q``) or ``t -> 0`` (``p > q``).
    """
    u = _nonzero(u)
    p, q = spec.p, spec.q
    b = float(node_weights(mesh, spec) @ np.abs(u) ** q)
    if b == 0.0:
        return float("inf")
    return (grad_energy(mesh, u, q) / q + grad_energy(mesh, u, p) / p) / (b / q)


class RayleighObjective:
    """``u -> J_q(u)/B(u)`` on ``C`` with iterates kept at ``B = 1``."""

    def __init__(self, mesh: Mesh, spec, shift_tol: float):
        self.mesh = mesh
        self.q = float(spec.q)
        self.weights = node_weights(mesh, spec)
        self.shift_tol = shift_tol
        self.ones = np.ones(mesh.n_nodes)

    def _parts(self, x):
        n = grad_energy(self.mesh, x, self.q)
        b = float(self.weights @ np.abs(x) ** self.q)
        return n, b

    def value(self, x):
        n, b = self._parts(x)
        return n / b if b > 0 else float("inf")

    def _grads(self, x, eps):
        n, b = self._parts(x)
        gn = grad_grad_energy(self.mesh, x, self.q, eps)
        gb = self.q * self.weights * signed_power(x, self.q - 1.0)
        return n, b, gn, gb

    def gradient(self, x, eps):
        n, b, gn, gb = self._grads(x, eps)
        return (gn - (n / b) * gb) / b

    def hessian(self, x, eps):
        n, b, gn, gb = self._grads(x, eps)
        r = n / b
        gr = (gn - r * gb) / b
        q = self.q
        hn = hess_grad_energy(self.mesh, x, q, eps).toarray()
        if q < 2.0:
            mag = (x * x + max(eps, 1e-10) ** 2) ** ((q - 2.0) / 2.0)
        else:
            mag = np.abs(x) ** (q - 2.0)
        hn[np.diag_indices_from(hn)] -= r * q * (q - 1.0) * self.weights * mag
        h = (hn - np.outer(gr, gb) - np.outer(gb, gr)) / b
        return reduce_hessian(h, (q - 1.0) * self.weights * mag)

    def retract(self, x):
        v = _shift(self.weights, self.q, x, self.shift_tol).shifted
        if _is_degenerate(self.weights, self.q, v):
            return None
        return v / float(self.weights @ np.abs(v) ** self.q) ** (1.0 / self.q)

    def stationarity(self, x, grad):
        n, b = self._parts(x)
        gn = np.linalg.norm(grad_grad_energy(self.mesh, x, self.q, 1e-10))
        gb = np.linalg.norm(self.q * self.weights * signed_power(x, self.q - 1.0))
        scale = (gn + (n / b) * gb) / b
        return float(np.linalg.norm(grad) / scale) if scale > 0 else 0.0

    def null_directions(self, x):
        return (self.ones, x)

    def eps_schedule(self, cfg: SolverConfig) -> list[float]:
        return cfg.smoothing.schedule() if self.q < 2.0 else [0.0]


def _converged(res) -> bool:
    return res.reason in ("stationary", "patience") or (
        res.reason == "stalled" and res.stationarity <= 1e-8
    )


def compute_lambda1(mesh: Mesh, spec, cfg: SolverConfig | None = None) -> Lambda1Result:
    """Minimize the q-quotient over ``C`` from ``cfg.n_restarts`` seeded starts.

    Each restart descends from :func:`random_cone_point` with Armijo steps
    until stationarity, stagnation over ``cfg.patience`` steps or the
    iteration cap. The smallest final quotient wins; ties within 1e-12
    (relative) go to the lowest restart index.
    """
    cfg = cfg or SolverConfig()
    obj = RayleighObjective(mesh, spec, cfg.shift_tol)
    schedule = obj.eps_schedule(cfg)

    def run(i):
        try:
            x0 = random_cone_point(mesh, spec, restart_seed(cfg.seed, i), cfg.shift_tol)
        except GenerationFailureError:
            return None
        return descend(obj, x0, cfg, schedule, cfg.polish_tol)

    results = run_restarts(run, cfg.n_restarts, cfg.threads)
    values = [r.value if r is not None else float("inf") for r in results]
    usable = [i for i, r in enumerate(results) if r is not None and np.isfinite(r.value)]
    if not usable:
        raise NoFeasibleStartError("every restart produced a degenerate cone point")
    best = usable[0]
    for i in usable[1:]:
        if values[i] < values[best] - 1e-12 * abs(values[best]):
            best = i
    res = results[best]
    log.info("lambda1 = %r (restart %d, %s)", res.value, best, res.reason)
    return Lambda1Result(
        lambda1=float(res.value),
        minimizer=res.x,
        restarts_used=len(usable),
        quotient_history=list(res.history),
        converged=any(_converged(results[i]) for i in usable),
        best_restart=best,
        restart_values=values,
        stationarity=float(res.stationarity),
    )
