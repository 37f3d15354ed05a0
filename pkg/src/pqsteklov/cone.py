"""The constraint cone ``C = {u : I(u) = 0}`` and its unit slice.

Fields are moved onto ``C`` by adding a constant: with lumped quadrature
``s -> I(u + s)`` is a sum of strictly increasing scalar maps, so the shift
is unique and bracketed by ``[-max u, -min u]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateDirectionError, GenerationFailureError, InvalidArgumentError
from .functionals import ProblemSpec, node_weights, signed_power
from .mesh import Mesh

__all__ = [
    "ShiftResult",
    "shift_to_cone",
    "normalize_to_C1",
    "random_cone_point",
    "DEFAULT_SHIFT_TOL",
]

DEFAULT_SHIFT_TOL = 1e-12
_MAX_RETRIES = 100


@dataclass(frozen=True)
class ShiftResult:
    """Outcome of :func:`shift_to_cone`.

    ``residual`` is ``|I(shifted)|``; ``tolerance`` is the absolute bound it
    was required to meet (``tol * sum(W) * max|shifted|^(q-1)``).
    """

    shifted: np.ndarray
    shift: float
    iterations: int
    residual: float
    tolerance: float


def constraint_scale(weights: np.ndarray, q: float, v: np.ndarray) -> float:
    """Magnitude against which ``|I(v)|`` is judged."""
    return float(weights.sum() * np.max(np.abs(v), initial=0.0) ** (q - 1.0))


def _shift(weights: np.ndarray, q: float, u: np.ndarray, tol: float) -> ShiftResult:
    active = weights > 0
    if not np.any(active):
        raise InvalidArgumentError("all weights vanish; the cone constraint is void")

    def g(s: float) -> float:
        return float(weights @ signed_power(u + s, q - 1.0))

    lo, hi = -float(u.max()), -float(u.min())
    iterations = 0
    if lo == hi:
        s = lo
    else:
        width = hi - lo  # relative, so tiny fields shift as accurately as large ones
        s, info = brentq(
            g, lo, hi, xtol=1e-14 * width, rtol=8.9e-16, maxiter=500, full_output=True
        )
        iterations = info.iterations
        # one Newton polish along constants, skipped where q < 2 makes it singular
        v = u + s
        if not (q < 2.0 and np.any(np.abs(v[active]) < 1e-12)):
            slope = float((q - 1.0) * weights @ np.abs(v) ** (q - 2.0))
            if slope > 0.0 and np.isfinite(slope):
                s_new = s - g(s) / slope
                if abs(g(s_new)) < abs(g(s)):
                    s = s_new
                iterations += 1
    shifted = u + s
    residual = abs(float(weights @ signed_power(shifted, q - 1.0)))
    return ShiftResult(shifted, float(s), iterations, residual, tol * constraint_scale(weights, q, shifted))


def shift_to_cone(mesh: Mesh, spec: ProblemSpec, u, tol: float = DEFAULT_SHIFT_TOL) -> ShiftResult:
    """Find the unique constant ``s`` with ``I(u + s) = 0``.

    Examples
    --------
    With ``q = 2``, ``a = 1`` on two elements of (0, 1) and ``u = (0, 1, 2)``
    the lumped mean is 1, so ``s = -1``.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be positive")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"field has shape {u.shape}, expected ({mesh.n_nodes},)")
    return _shift(node_weights(mesh, spec), spec.q, u, tol)


def _is_degenerate(weights: np.ndarray, q: float, v: np.ndarray) -> bool:
    b = float(weights @ np.abs(v) ** q)
    top = np.max(np.abs(v), initial=0.0)
    return b <= 0.0 or b ** (1.0 / q) <= 1e-10 * weights.sum() ** (1.0 / q) * top


def normalize_to_C1(mesh: Mesh, spec: ProblemSpec, u) -> np.ndarray:
    """Rescale a cone element to ``B(u) = 1``; raises when ``B(u) = 0``."""
    u = np.asarray(u, dtype=float)
    weights = node_weights(mesh, spec)
    if abs(float(weights @ signed_power(u, spec.q - 1.0))) > 1e-8 * max(
        constraint_scale(weights, spec.q, u), np.finfo(float).tiny
    ):
        raise InvalidArgumentError("field is not in the cone C")
    b = float(weights @ np.abs(u) ** spec.q)
    if not b > 0.0:
        raise DegenerateDirectionError("weighted q-norm vanishes; the quotient is +inf")
    return u / b ** (1.0 / spec.q)


def random_cone_point(mesh: Mesh, spec: ProblemSpec, seed: int, tol: float = DEFAULT_SHIFT_TOL) -> np.ndarray:
    """Seeded uniform draw on [-1, 1]^N, shifted onto C and normalized to B = 1."""
    rng = np.random.default_rng(seed)
    weights = node_weights(mesh, spec)
    for _ in range(_MAX_RETRIES):
        res = _shift(weights, spec.q, rng.uniform(-1.0, 1.0, mesh.n_nodes), tol)
        v = res.shifted
        if not _is_degenerate(weights, spec.q, v):
            return v / float(weights @ np.abs(v) ** spec.q) ** (1.0 / spec.q)
    raise GenerationFailureError(
        f"no non-degenerate cone point after {_MAX_RETRIES} draws (seed {seed})"
    )
