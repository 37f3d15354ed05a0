"""Projected descent with Armijo backtracking over the discrete cone.

Every iterate lives on ``C`` (and, for scale-free objectives, on ``B = 1``);
after each trial step the field is pulled back by :func:`cone.shift_to_cone`.
Because the objectives used here satisfy ``<grad f, 1> = 0`` on ``C``, the
gradient of ``u -> f(u + s(u))`` equals ``grad f`` at the shifted point and
its Hessian is ``T^T H T`` with ``T = I + 1 s'^T``, ``s' = -grad I / sum(grad I)``.
The descent direction is that reduced Hessian with its spectrum folded to
absolute values (saddle-free Newton), which keeps every step a descent
direction while converging quadratically near a nondegenerate minimizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Protocol, Sequence, TypeVar

import numpy as np

from .errors import InvalidArgumentError
from .functionals import SmoothingConfig

__all__ = ["SolverConfig", "DescentResult", "descend", "polish", "reduce_hessian", "restart_seed", "run_restarts"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the threshold and eigenfunction solvers."""

    n_restarts: int = 8
    seed: int = 0
    threads: int = 1
    max_iter: int = 5000
    rel_tol: float = 1e-8
    patience: int = 25
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 60
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    residual_tol: float = 1e-7
    polish_tol: float = 1e-12
    shift_tol: float = 1e-12
    feasibility_margin: float = 1e-9
    warm_start_gap: float = 1e-3

    def __post_init__(self):
        if self.n_restarts < 1 or self.max_iter < 1 or self.patience < 1 or self.threads < 1:
            raise InvalidArgumentError("n_restarts, max_iter, patience and threads must be >= 1")
        for name in ("rel_tol", "residual_tol", "polish_tol", "shift_tol", "initial_step"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if not 0 < self.armijo_c < 0.5:
            raise InvalidArgumentError("armijo_c must lie in (0, 0.5)")
        if not 0 < self.backtrack < 1:
            raise InvalidArgumentError("backtrack must lie in (0, 1)")
        if not 0 <= self.feasibility_margin < 1 or not 0 <= self.warm_start_gap < 1:
            raise InvalidArgumentError("feasibility_margin and warm_start_gap must lie in [0, 1)")


def restart_seed(seed: int, restart: int) -> int:
    """Independent integer seed for one restart of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(restart)]).generate_state(1, np.uint64)[0])


T = TypeVar("T")


def run_restarts(fn: Callable[[int], T], n: int, threads: int = 1) -> list[T]:
    """``[fn(0), ..., fn(n-1)]``, optionally on a thread pool; order is preserved."""
    if threads <= 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
        return list(pool.map(fn, range(n)))


class Objective(Protocol):
    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray, eps: float) -> np.ndarray: ...

    def hessian(self, x: np.ndarray, eps: float) -> np.ndarray: ...

    def retract(self, x: np.ndarray) -> np.ndarray | None: ...

    def stationarity(self, x: np.ndarray, grad: np.ndarray) -> float: ...

    def null_directions(self, x: np.ndarray) -> Sequence[np.ndarray]: ...


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    history: list[float]
    iterations: int
    reason: str
    stationarity: float


def reduce_hessian(h: np.ndarray, shift_gradient: np.ndarray) -> np.ndarray:
    """``T^T H T`` for the shift parametrization ``u -> u + s(u) 1``."""
    total = shift_gradient.sum()
    if not total > 0 or not np.isfinite(total):
        return h
    ds = -shift_gradient / total
    ht = h + np.outer(h.sum(axis=1), ds)
    return ht + np.outer(ds, ht.sum(axis=0))


def _direction(h: np.ndarray, g: np.ndarray, nulls: Sequence[np.ndarray]) -> np.ndarray:
    h = 0.5 * (h + h.T)
    scale = float(np.max(np.abs(np.diag(h)), initial=0.0))
    if not scale > 0 or not np.isfinite(scale):
        return -g
    for n in nulls:
        nn = float(n @ n)
        if nn > 0:
            h = h + (scale / nn) * np.outer(n, n)
    w, v = np.linalg.eigh(h)
    w = np.maximum(np.abs(w), 1e-13 * np.max(np.abs(w)))
    d = -(v @ ((v.T @ g) / w))
    if not np.all(np.isfinite(d)) or g @ d >= 0:
        return -g
    return d


def descend(
    obj: Objective,
    x0: np.ndarray,
    cfg: SolverConfig,
    eps_schedule: Sequence[float],
    gtol: float,
    stop_early: Callable[[np.ndarray, float], bool] | None = None,
    use_patience: bool = True,
) -> DescentResult:
    """Minimize ``obj`` from ``x0`` through the smoothing stages ``eps_schedule``.

    ``reason`` is one of ``stationary`` (stationarity <= gtol), ``patience``
    (relative decrease below ``cfg.rel_tol`` over ``cfg.patience`` steps),
    ``stalled`` (no acceptable step, or neither stationarity nor ``f`` has
    moved beyond rounding within ``cfg.patience`` steps), ``early`` (``stop_early`` fired) or ``max_iter``.
    """
    x = np.array(x0, dtype=float)
    f = obj.value(x)
    history = [f]
    iterations = 0
    reason = "max_iter"
    st = np.inf
    for stage, eps in enumerate(eps_schedule):
        last_stage = stage == len(eps_schedule) - 1
        stage_start = len(history)
        reason = "max_iter"
        best_st, best_at = np.inf, iterations
        while iterations < cfg.max_iter:
            if stop_early is not None and stop_early(x, f):
                return DescentResult(x, f, history, iterations, "early", st)
            g = obj.gradient(x, eps)
            st = obj.stationarity(x, g)
            if st <= gtol:
                reason = "stationary"
                break
            if st < 0.5 * best_st:
                best_st, best_at = st, iterations
            elif (
                iterations - best_at >= cfg.patience
                and history[-1 - cfg.patience] - f <= 1e-13 * abs(f)
            ):
                reason = "stalled"
                break
            d = _direction(obj.hessian(x, eps), g, obj.null_directions(x))
            step = _line_search(obj, x, f, g, d, cfg, st, eps)
            iterations += 1
            if step is None:
                reason = "stalled"
                break
            x, f = step
            history.append(f)
            k = cfg.patience
            if (
                use_patience
                and len(history) - stage_start > k
                and history[-1 - k] - f <= cfg.rel_tol * abs(f)
            ):
                reason = "patience"
                break
        if not last_stage and reason == "max_iter":
            break
    if reason != "stationary":
        st = obj.stationarity(x, obj.gradient(x, eps_schedule[-1]))
    log.debug("descent stopped: %s after %d iterations, f=%r", reason, iterations, f)
    return DescentResult(x, f, history, iterations, reason, st)


def _line_search(obj, x, f, g, d, cfg: SolverConfig, st, eps):
    slope = float(g @ d)
    alpha = cfg.initial_step
    first = None
    for _ in range(cfg.max_backtracks):
        xt = obj.retract(x + alpha * d)
        if xt is not None:
            ft = obj.value(xt)
            if first is None:
                first = (xt, ft)
            if np.isfinite(ft) and ft <= f + cfg.armijo_c * alpha * slope:
                return xt, ft
        alpha *= cfg.backtrack
    # At rounding level Armijo cannot certify decrease; still take the full
    # step when it does not increase f and improves stationarity.
    if first is not None and first[1] <= f:
        xt, ft = first
        if obj.stationarity(xt, obj.gradient(xt, eps)) < st:
            return xt, ft
    return None


def polish(obj: Objective, x: np.ndarray, eps: float, gtol: float, max_steps: int = 20) -> np.ndarray:
    """Plain Newton on ``grad f = 0`` in the reduced space, monotone in stationarity.

    Used after :func:`descend` when the energy has stopped resolving progress
    but the weak-form defect can still be driven to rounding level.
    """
    g = obj.gradient(x, eps)
    st = obj.stationarity(x, g)
    for _ in range(max_steps):
        if st <= gtol:
            break
        h = obj.hessian(x, eps)
        h = 0.5 * (h + h.T)
        scale = float(np.max(np.abs(np.diag(h)), initial=0.0))
        for n in obj.null_directions(x):
            nn = float(n @ n)
            if nn > 0:
                h = h + (scale / nn) * np.outer(n, n)
        try:
            d = -np.linalg.solve(h, g)
        except np.linalg.LinAlgError:
            break
        xt = obj.retract(x + d) if np.all(np.isfinite(d)) else None
        if xt is None or not np.isfinite(obj.value(xt)):
            break
        gt = obj.gradient(xt, eps)
        stt = obj.stationarity(xt, gt)
        if not stt < st:
            break
        x, g, st = xt, gt, stt
    return x
