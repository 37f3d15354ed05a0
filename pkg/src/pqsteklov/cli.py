"""Command-line front end.

::

    pqsteklov --config run.json [--out DIR] [--seed N] [--threads N] lambda1
    pqsteklov --config run.json solve --lambda 20
    pqsteklov --config run.json sweep --min 0 --max 40 --count 9
    pqsteklov --config run.json verify

Exit codes: 0 success, 1 usage or configuration error, 2 no eigenfunction
(infeasible or not found), 3 numerical non-convergence or failed checks.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .descent import SolverConfig
from .eigensolver import CONVERGED, INFEASIBLE, NOT_FOUND, EigenResult, solve
from .errors import PQSteklovError
from .functionals import ProblemSpec, SmoothingConfig, validate_problem
from .mesh import Mesh, generate_interval, generate_unit_square, read_mesh
from .rayleigh import compute_lambda1
from .verify import (
    VerificationReport,
    check_lambda_tilde_equality,
    check_p_independence,
    check_spectrum_structure,
)

__all__ = ["ConfigError", "RunConfig", "load_config", "main", "cmd_lambda1", "cmd_solve", "cmd_sweep", "cmd_verify"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NONCONVERGED = 0, 1, 2, 3


class ConfigError(PQSteklovError, ValueError):
    """Unreadable or invalid run configuration."""


# -- configuration -------------------------------------------------------------


@dataclass
class RunConfig:
    """A loaded run: mesh, problem, solver settings and output location.

    Constant weights in the file are already expanded to per-entity arrays.
    """

    mesh: Mesh
    spec: ProblemSpec
    solver: SolverConfig
    out_dir: Path
    field_dump: bool = True
    verify: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)


_SECTIONS = {"mesh", "problem", "solver", "output", "verify"}


def _section(raw: dict, name: str, required: bool = True) -> dict:
    sec = raw.get(name)
    if sec is None and not required:
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be an object")
    return sec


def _unknown(sec: dict, allowed, where: str) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in {where}: {', '.join(extra)}")


def _build_mesh(sec: dict, base: Path) -> Mesh:
    kind = sec.get("kind")
    try:
        if kind == "interval":
            _unknown(sec, {"kind", "n_elements", "length"}, "mesh")
            return generate_interval(int(sec.get("n_elements", 100)), float(sec.get("length", 1.0)))
        if kind == "unit_square":
            _unknown(sec, {"kind", "n_per_side"}, "mesh")
            return generate_unit_square(int(sec.get("n_per_side", 8)))
        if kind == "file":
            _unknown(sec, {"kind", "path"}, "mesh")
            return read_mesh(base / sec["path"])
    except (KeyError, TypeError, OSError) as err:
        raise ConfigError(f"mesh section: {err}") from err
    raise ConfigError(f"mesh kind must be interval, unit_square or file, got {kind!r}")


def _weights(value, n: int, name: str) -> np.ndarray:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.full(n, float(value))
    if isinstance(value, list):
        arr = np.asarray(value, dtype=float)
        if arr.shape != (n,):
            raise ConfigError(f"weight '{name}' has {arr.size} entries, mesh needs {n}")
        return arr
    raise ConfigError(f"weight '{name}' must be a number or a list of numbers")


def _build_solver(sec: dict) -> SolverConfig:
    names = {f.name for f in fields(SolverConfig)}
    _unknown(sec, names, "solver")
    kw = dict(sec)
    if "smoothing" in kw:
        sm = kw["smoothing"]
        if not isinstance(sm, dict):
            raise ConfigError("solver.smoothing must be an object")
        _unknown(sm, {f.name for f in fields(SmoothingConfig)}, "solver.smoothing")
        kw["smoothing"] = SmoothingConfig(**sm)
    return SolverConfig(**kw)


def load_config(path, out=None, seed=None, threads=None) -> RunConfig:
    """Read and validate a JSON run file; command-line overrides win."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _unknown(raw, _SECTIONS, "config")
    mesh = _build_mesh(_section(raw, "mesh"), path.parent)

    prob = _section(raw, "problem")
    _unknown(prob, {"p", "q", "a", "b"}, "problem")
    try:
        p, q = float(prob["p"]), float(prob["q"])
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"problem section needs numeric p and q: {err}") from err
    a = _weights(prob.get("a", 0.0), mesh.n_elements, "a")
    b = _weights(prob.get("b", 0.0), mesh.n_facets, "b")
    spec = ProblemSpec(p, q, a, b)
    validate_problem(mesh, spec)

    try:
        solver = _build_solver(_section(raw, "solver", required=False))
    except TypeError as err:
        raise ConfigError(f"solver section: {err}") from err
    if seed is not None:
        solver = replace(solver, seed=int(seed))
    if threads is not None:
        solver = replace(solver, threads=int(threads))

    outsec = _section(raw, "output", required=False)
    _unknown(outsec, {"directory", "field_dump"}, "output")
    out_dir = Path(out) if out is not None else path.parent / outsec.get("directory", "out")
    verify = _section(raw, "verify", required=False)
    _unknown(verify, {"below", "above", "p_list", "decades"}, "verify")
    return RunConfig(mesh, spec, solver, out_dir, bool(outsec.get("field_dump", True)), verify, raw)


# -- output ------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _dump_json(path: Path, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def field_dump_text(mesh: Mesh, u: np.ndarray) -> str:
    """One line per node: coordinates then value, 17 significant digits."""
    buf = io.StringIO()
    for x, v in zip(mesh.nodes, u):
        buf.write(" ".join(f"{c:.17g}" for c in (*x, v)))
        buf.write("\n")
    return buf.getvalue()


def _write_field(run: RunConfig, name: str, u) -> str | None:
    if not run.field_dump or u is None:
        return None
    _atomic_write(run.out_dir / name, field_dump_text(run.mesh, u))
    return name


def _problem_doc(run: RunConfig) -> dict:
    return {"p": run.spec.p, "q": run.spec.q, "dim": run.mesh.dim, "n_nodes": run.mesh.n_nodes}


def eigen_doc(res: EigenResult) -> dict:
    return {
        "lambda": _num(res.lam),
        "status": res.status,
        "regime": res.regime,
        "weak_residual": _num(res.weak_residual),
        "constraint_residual": _num(res.constraint_residual),
        "energy": _num(res.energy),
        "nehari_gap": _num(res.nehari_gap),
        "J_p": _num(res.J_p),
        "J_q": _num(res.J_q),
        "B": _num(res.B),
        "best_restart": res.best_restart,
        "restart_status": list(res.restart_status),
    }


def _eigen_exit(status: str) -> int:
    if status == CONVERGED:
        return EXIT_OK
    if status in (INFEASIBLE, NOT_FOUND):
        return EXIT_INFEASIBLE
    return EXIT_NONCONVERGED


# -- commands --------------------------------------------------------------------


def cmd_lambda1(run: RunConfig) -> int:
    res = compute_lambda1(run.mesh, run.spec, run.solver)
    doc = {
        "problem": _problem_doc(run),
        "lambda1": res.lambda1,
        "converged": res.converged,
        "restarts": res.restarts_used,
        "best_restart": res.best_restart,
        "restart_values": [_num(v) for v in res.restart_values],
        "stationarity": _num(res.stationarity),
        "history": [float(v) for v in res.quotient_history],
        "field_dump": _write_field(run, "lambda1_field.txt", res.minimizer),
    }
    _dump_json(run.out_dir / "lambda1.json", doc)
    print(f"lambda1 = {res.lambda1!r} ({'converged' if res.converged else 'not converged'})")
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_solve(run: RunConfig, lam: float) -> int:
    res = solve(run.mesh, run.spec, lam, run.solver)
    stem = f"eigen_{float(lam)!r}"
    doc = {"problem": _problem_doc(run), **eigen_doc(res)}
    doc["field_dump"] = _write_field(run, f"{stem}_field.txt", res.eigenfunction)
    _dump_json(run.out_dir / f"{stem}.json", doc)
    print(f"lambda = {float(lam)!r}: {res.status} (weak_residual {res.weak_residual:.3e})")
    return _eigen_exit(res.status)


SWEEP_COLUMNS = ("lambda", "status", "energy", "weak_residual", "J_p", "J_q", "B")


def cmd_sweep(run: RunConfig, lam_min: float, lam_max: float, count: int) -> int:
    if not (0.0 <= lam_min <= lam_max) or count < 1:
        raise ConfigError("sweep needs 0 <= min <= max and count >= 1")
    lams = [lam_min] if count == 1 else list(np.linspace(lam_min, lam_max, count))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for lam in lams:
        res = solve(run.mesh, run.spec, float(lam), run.solver)
        row = [float(lam), res.status, res.energy, res.weak_residual, res.J_p, res.J_q, res.B]
        writer.writerow([v if isinstance(v, str) else f"{v:.17g}" for v in row])
        print(f"lambda = {float(lam)!r}: {res.status}")
    _atomic_write(run.out_dir / "sweep.csv", buf.getvalue())
    return EXIT_OK


def run_verification(run: RunConfig) -> VerificationReport:
    v = run.verify
    report = VerificationReport()
    kw = {k: tuple(v[k]) for k in ("below", "above") if k in v}
    report.extend(check_spectrum_structure(run.mesh, run.spec, run.solver, **kw), "spectrum/")
    report.extend(
        check_lambda_tilde_equality(run.mesh, run.spec, run.solver, decades=int(v.get("decades", 6))),
        "lambda_tilde/",
    )
    if "p_list" in v:
        report.extend(
            check_p_independence(
                run.mesh, run.spec.q, (run.spec.a, run.spec.b), list(v["p_list"]), run.solver
            ),
            "p_independence/",
        )
    return report


def cmd_verify(run: RunConfig) -> int:
    report = run_verification(run)
    doc = report.to_dict()
    doc["problem"] = _problem_doc(run)
    _dump_json(run.out_dir / "report.json", doc)
    for c in report.checks:
        print(f"{c.status:4s}  {c.name}")
    print("overall:", "pass" if report.overall else "fail")
    return EXIT_OK if report.overall else EXIT_NONCONVERGED


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pqsteklov", description="(p,q)-Laplacian Steklov-type eigenvalue solver")
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--seed", type=int, help="master seed (overrides solver.seed)")
    ap.add_argument("--threads", type=int, help="restart threads (overrides solver.threads)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("lambda1", help="threshold eigenvalue and its minimizer")
    s = sub.add_parser("solve", help="eigenfunction for one lambda")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s = sub.add_parser("sweep", help="solve on an evenly spaced lambda grid")
    s.add_argument("--min", dest="lam_min", type=float, required=True)
    s.add_argument("--max", dest="lam_max", type=float, required=True)
    s.add_argument("--count", type=int, required=True)
    sub.add_parser("verify", help="run the verification suite")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        run = load_config(args.config, args.out, args.seed, args.threads)
        if args.command == "lambda1":
            return cmd_lambda1(run)
        if args.command == "solve":
            return cmd_solve(run, args.lam)
        if args.command == "sweep":
            return cmd_sweep(run, args.lam_min, args.lam_max, args.count)
        return cmd_verify(run)
    except (ConfigError, ValueError) as err:
        # ProblemSpec and SolverConfig validation surface as ValueError subclasses
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except PQSteklovError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
