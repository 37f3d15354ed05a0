"""Machine-checkable statements about solver output.

Each ``check_*`` function returns a :class:`VerificationReport` and records
failures instead of raising. :func:`weak_form_residual` is the independent
oracle: it assembles the weak form element by element without touching the
vectorized gradient code in :mod:`pqsteklov.functionals`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .descent import SolverConfig
from .eigensolver import INFEASIBLE, NOT_FOUND, solve
from .errors import InvalidArgumentError, PQSteklovError
from .functionals import ProblemSpec, grad_energy, validate_problem
from .mesh import Mesh
from .rayleigh import compute_lambda1, lambda_tilde_quotient

__all__ = [
    "Check",
    "VerificationReport",
    "check_spectrum_structure",
    "check_lambda_tilde_equality",
    "check_p_independence",
    "weak_form_defect",
    "weak_form_residual",
]

PASS, FAIL, SKIP = "pass", "fail", "skip"


def _json_number(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class Check:
    name: str
    status: str
    value: float | None = None
    tolerance: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "value": _json_number(self.value),
            "tolerance": _json_number(self.tolerance),
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    """Ordered list of checks; ``overall`` is true iff none failed."""

    checks: list[Check] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def overall(self) -> bool:
        return not any(c.status == FAIL for c in self.checks)

    def add(self, name, ok, value=None, tolerance=None, detail="") -> Check:
        c = Check(name, PASS if ok else FAIL, value, tolerance, detail)
        self.checks.append(c)
        return c

    def skip(self, name, detail="") -> Check:
        c = Check(name, SKIP, detail=detail)
        self.checks.append(c)
        return c

    def extend(self, other: "VerificationReport", prefix: str = "") -> None:
        for c in other.checks:
            self.checks.append(Check(prefix + c.name, c.status, c.value, c.tolerance, c.detail))
        for k, v in other.meta.items():
            self.meta[prefix + k] = v

    def counts(self) -> dict:
        out = {PASS: 0, FAIL: 0, SKIP: 0}
        for c in self.checks:
            out[c.status] += 1
        return out

    def to_dict(self) -> dict:
        meta = {k: _json_number(v) if isinstance(v, float) else v for k, v in self.meta.items()}
        return {"overall": self.overall, "checks": [c.to_dict() for c in self.checks], "meta": meta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)


# -- independent weak-form assembly ------------------------------------------


def _local_basis_gradients(coords: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradients of the barycentric basis on one simplex and its measure."""
    dim = coords.shape[1]
    m = np.hstack([np.ones((dim + 1, 1)), coords])
    measure = abs(np.linalg.det(coords[1:] - coords[0])) / math.factorial(dim)
    # column j of inv(m) holds the coefficients of phi_j = c0 + c . x
    return np.linalg.inv(m)[1:, :].T, measure


def _facet_measure(coords: np.ndarray) -> float:
    if coords.shape[0] == 1:
        return 1.0
    return float(np.linalg.norm(coords[1] - coords[0]))


def _flux(g: np.ndarray, r: float) -> np.ndarray:
    mag = math.sqrt(float(g @ g))
    if mag == 0.0:
        return np.zeros_like(g)
    return mag ** (r - 2.0) * g


def _power(s: float, q: float) -> float:
    return 0.0 if s == 0.0 else math.copysign(abs(s) ** (q - 1.0), s)


def weak_form_defect(mesh: Mesh, spec, lam: float, u) -> tuple[np.ndarray, np.ndarray]:
    """Assembled ``(A(u) - lam F(u), A(u))`` tested against every P1 basis function.

    ``A`` carries the two gradient terms, ``F`` the lumped ``a`` and ``b``
    weight terms. Flat elements contribute zero flux.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise InvalidArgumentError(f"field has shape {u.shape}, expected ({mesh.n_nodes},)")
    p, q = float(spec.p), float(spec.q)
    a, b = np.asarray(spec.a, dtype=float), np.asarray(spec.b, dtype=float)
    dim = mesh.dim
    lhs = np.zeros(mesh.n_nodes)
    rhs = np.zeros(mesh.n_nodes)
    for k, elem in enumerate(mesh.elements):
        grads, measure = _local_basis_gradients(mesh.nodes[elem])
        g = sum(u[v] * grads[j] for j, v in enumerate(elem))
        flux = _flux(g, p) + _flux(g, q)
        for j, v in enumerate(elem):
            lhs[v] += measure * float(flux @ grads[j])
            rhs[v] += a[k] * measure / (dim + 1) * _power(u[v], q)
    for f, facet in enumerate(mesh.boundary_facets):
        measure = _facet_measure(mesh.nodes[facet])
        for v in facet:
            rhs[v] += b[f] * measure / dim * _power(u[v], q)
    return lhs - lam * rhs, lhs


def weak_form_residual(mesh: Mesh, spec, lam: float, u) -> float:
    """``|A(u) - lam F(u)| / |A(u)|``; the bare defect norm when ``A(u) = 0``."""
    defect, lhs = weak_form_defect(mesh, spec, lam, u)
    nd, nl = float(np.linalg.norm(defect)), float(np.linalg.norm(lhs))
    return nd / nl if nl > 0 else nd


# -- checks --------------------------------------------------------------------


def _invalid(report: VerificationReport, err: Exception) -> VerificationReport:
    report.add("invalid_problem", False, detail=str(err))
    return report


def check_spectrum_structure(
    mesh: Mesh,
    spec,
    cfg: SolverConfig | None = None,
    below: Sequence[float] = (0.25, 0.5, 0.9),
    above: Sequence[float] = (1.1, 2.0, 10.0),
) -> VerificationReport:
    """The eigenvalue set is ``{0}`` together with everything above the threshold.

    Solves at ``lam = 0``, at the fractions ``below`` of the computed
    threshold (expecting no eigenfunction) and at the multiples ``above``
    (expecting a converged eigenpair with ``weak_residual <= residual_tol``).
    """
    cfg = cfg or SolverConfig()
    report = VerificationReport()
    try:
        validate_problem(mesh, spec)
        lam1 = compute_lambda1(mesh, spec, cfg)
    except PQSteklovError as err:
        return _invalid(report, err)
    l1 = lam1.lambda1
    report.meta.update(lambda1=l1, lambda1_converged=lam1.converged)

    res = solve(mesh, spec, 0.0, cfg)
    u = res.eigenfunction
    const = u is not None and bool(np.all(u == u[0])) and u[0] != 0
    report.add("lambda0_constant", const and res.weak_residual == 0.0, res.weak_residual, 0.0)

    for f in below:
        res = solve(mesh, spec, f * l1, cfg)
        report.add(f"below_{f:g}", res.status in (INFEASIBLE, NOT_FOUND), f * l1, l1, res.status)
    for f in above:
        res = solve(mesh, spec, f * l1, cfg)
        ok = res.converged and res.weak_residual <= cfg.residual_tol
        report.add(f"above_{f:g}", ok, res.weak_residual, cfg.residual_tol, res.status)
    if spec.p > spec.q:
        report.skip(
            "lambda1_ge_lambda1q",
            "the two thresholds coincide on the discrete cone; the continuum inequality is not testable",
        )
    return report


def check_lambda_tilde_equality(
    mesh: Mesh, spec, cfg: SolverConfig | None = None, decades: int = 6, ratio_tol: float = 0.2
) -> VerificationReport:
    """``(q J_q/q + q J_p/p) / B`` along ``t u*`` decays onto the threshold.

    ``t = 10^k`` for ``p < q`` and ``10^-k`` for ``p > q``; the gap to the
    threshold should shrink by ``10^|p-q|`` per decade.
    """
    cfg = cfg or SolverConfig()
    report = VerificationReport()
    try:
        validate_problem(mesh, spec)
        lam1 = compute_lambda1(mesh, spec, cfg)
    except PQSteklovError as err:
        return _invalid(report, err)
    l1, u = lam1.lambda1, lam1.minimizer
    p, q = float(spec.p), float(spec.q)
    sign = 1.0 if p < q else -1.0
    ts = [10.0 ** (sign * k) for k in range(decades + 1)]
    gaps = [lambda_tilde_quotient(mesh, spec, t * u) - l1 for t in ts]
    report.meta.update(lambda1=l1, t=ts, gaps=gaps)

    report.add("dominates_at_t1", gaps[0] >= -1e-9, gaps[0], -1e-9)
    monotone = all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
    report.add("monotone_gaps", monotone)
    jp = grad_energy(mesh, u, p)
    bound = max(1e-8 * l1, ts[-1] ** (p - q) * (q / p) * jp * 10.0)
    report.add("terminal_gap", 0.0 <= gaps[-1] <= bound, gaps[-1], bound)
    expected = 10.0 ** abs(p - q)
    worst = 0.0
    for g0, g1 in zip(gaps, gaps[1:]):
        ratio = g0 / g1 if g1 > 0 else math.inf
        worst = max(worst, abs(ratio / expected - 1.0))
    report.add("decay_rate", worst <= ratio_tol, worst, ratio_tol)
    return report


def check_p_independence(
    mesh: Mesh,
    q: float,
    weights,
    p_list: Sequence[float],
    cfg: SolverConfig | None = None,
    low: float = 0.8,
    high: float = 1.2,
) -> VerificationReport:
    """Same threshold for every ``p < q`` and the same side-of-threshold behavior.

    ``weights`` is an ``(a, b)`` pair of per-element and per-facet arrays.
    An empty ``p_list`` passes vacuously.
    """
    cfg = cfg or SolverConfig()
    report = VerificationReport()
    if any(not 1.0 < p < q for p in p_list):
        raise InvalidArgumentError(f"every p must lie in (1, q = {q}), got {list(p_list)}")
    if not p_list:
        return report
    a, b = weights
    values = []
    for p in p_list:
        try:
            spec = ProblemSpec(p, q, a, b)
            validate_problem(mesh, spec)
            l1 = compute_lambda1(mesh, spec, cfg).lambda1
        except PQSteklovError as err:
            return _invalid(report, err)
        values.append(l1)
        up = solve(mesh, spec, high * l1, cfg)
        report.add(
            f"p={p:g}/above_{high:g}",
            up.converged and up.weak_residual <= cfg.residual_tol,
            up.weak_residual,
            cfg.residual_tol,
            up.status,
        )
        down = solve(mesh, spec, low * l1, cfg)
        report.add(f"p={p:g}/below_{low:g}", down.status in (INFEASIBLE, NOT_FOUND), low * l1, l1, down.status)
    spread = max(values) - min(values)
    report.checks.insert(0, Check("lambda1_identical", PASS if spread == 0.0 else FAIL, spread, 0.0))
    report.meta.update(lambda1=values[0], p_list=[float(p) for p in p_list])
    return report
