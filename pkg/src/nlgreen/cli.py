"""Command-line front end.

Usage::

    nlgreen <command> [--preset NAME] [--config FILE] [--set key.path=value ...]
                      [--seed N] [--out DIR]

Exit status: 0 when every gate passes, 1 on a property failure (including
refused data such as Dirac measures with a supercritical absorption), 2 on
usage or configuration errors.  Every command writes its numeric output as
CSV plus a JSON verdict into the output directory.
"""
from __future__ import annotations

import argparse
import dataclasses
import csv
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, suites
from .config import COMMANDS, PRESET_ALIASES, PRESETS, RunConfig, build_config
from .exceptions import ConfigError, NLGreenError
from .experiments import (ExperimentPlan, boundary_singularity_run, config_hash, criticality_sweep,
                          make_setup, martin_source_decay, stability_run)
from .greenop import nudge_off_nodes
from .measures import RadonMeasure
from .nonlinearity import Nonlinearity
from .solver import SolverConfig, criticality_gate, monotone_solve, picard_solve
from .spaces import ExponentTable, p_star


# --------------------------------------------------------------------------
# emission
# --------------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: str, header, rows) -> None:
    """CSV with a header row, ``'.'`` decimals and 17 significant digits."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path: str, payload: dict) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def version_string() -> str:
    """``git describe`` output when run from a checkout, else ``v<version>``."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return f"v{__version__}"
    desc = out.stdout.strip()
    if out.returncode != 0 or not desc:
        return f"v{__version__}"
    if desc.split("-")[0].startswith("v"):
        return desc
    return f"v{__version__}-g{desc}"           # no tags: hash (and -dirty) only


class Outcome:
    """Tables and gates collected by one command."""

    def __init__(self):
        self.tables: dict = {}
        self.gates: dict = {}
        self.metrics: dict = {}
        self.notes: list = []

    def add_checks(self, name: str, checks) -> None:
        self.tables[name] = (suites.HEADER, [c.row() for c in checks])
        for c in checks:
            self.gates[f"{c.suite}:{c.check}"] = bool(c.passed)

    def absorb(self, res, prefix: str | None = None) -> None:
        for k, v in res.tables.items():
            self.tables[k] = v
        for k, v in res.gates.items():
            self.gates[f"{prefix or res.experiment}:{k}"] = bool(v)
        self.metrics[prefix or res.experiment] = res.metrics

    @property
    def passed(self) -> bool:
        return all(self.gates.values())


def emit(rc: RunConfig, out: Outcome) -> None:
    os.makedirs(rc.output_dir, exist_ok=True)
    for name, (header, rows) in out.tables.items():
        write_csv(os.path.join(rc.output_dir, f"{name}.csv"), header, rows)
    resolved = rc.resolved()
    failed = sorted(k for k, v in out.gates.items() if not v)
    write_json(os.path.join(rc.output_dir, f"{rc.command.replace('-', '_')}.json"), {
        "command": rc.command, "verdict": "pass" if out.passed else "fail",
        # worker count cannot change results, so it stays out of the hash
        "config_hash": config_hash({k: v for k, v in resolved.items() if k != "workers"}), "config": resolved, "seed": rc.seed,
        "version": version_string(), "tables": sorted(f"{n}.csv" for n in out.tables),
        "n_gates": len(out.gates), "failed": failed, "metrics": out.metrics, "notes": rc.notes + out.notes})


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _setup(rc: RunConfig):
    return make_setup(rc.kernel, rc.mesh)


def _is_estimate(backend) -> bool:
    return backend.label != "exact"


def cmd_kernel_check(rc: RunConfig) -> Outcome:
    """Kernel envelope, symmetry, Martin limit and compactness proxies."""
    backend, mesh, op = _setup(rc)
    e = rc.experiment
    out = Outcome()
    checks = suites.envelope_suite(backend, rc.seed, e["n_pairs"]) + suites.operator_suite(op)
    checks += suites.martin_suite(backend)
    if e["compactness"]:
        checks += suites.compactness_suite(op, rc.seed, tuple(e["hs"]), e["n_sv"])
    out.add_checks("kernel_check", checks)
    out.metrics = {"label": backend.label, "n": mesh.n, "p_star": p_star(mesh.spec.N, mesh.spec.s, mesh.spec.gamma)}
    return out


def cmd_norms(rc: RunConfig) -> Outcome:
    """Marcinkiewicz norm equivalence on the function corpus."""
    _, mesh, _ = _setup(rc)
    sp = mesh.spec
    qs = tuple(rc.experiment["qs"])
    out = Outcome()
    rows = suites.marcinkiewicz_rows(mesh, sp.gamma, rc.seed, qs)
    out.tables["norms"] = (["function", "q", "alpha", "lq_norm", "weak_quasinorm", "weak_norm"], rows)
    checks = suites.marcinkiewicz_checks(rows)
    out.add_checks("norms_checks", checks)
    t = ExponentTable.build(sp.N, sp.s, sp.gamma)
    out.metrics = {"exponents": dataclasses.asdict(t)}
    return out


def _measure(rc: RunConfig, op) -> tuple[RadonMeasure, list]:
    d = rc.experiment["measure"] or {"atoms": [], "density": None}
    mu = RadonMeasure.from_dict({"atoms": d.get("atoms") or [], "density": d.get("density")}, op.mesh)
    notes = []
    if mu.n_atoms:
        locs = np.array([nudge_off_nodes(op, y) for y in mu.locations])
        moved = np.linalg.norm(locs - mu.locations, axis=1) > 0
        for y0, y1 in zip(mu.locations[moved], locs[moved]):
            notes.append(f"atom at {y0.tolist()} moved to {y1.tolist()} (too close to a mesh node)")
        mu = RadonMeasure(mu.spec, locs, mu.masses, mu.density)
    return mu, notes


def cmd_solve(rc: RunConfig) -> Outcome:
    """Solve u + G[g(u)] = G[mu] and write the nodal solution."""
    backend, mesh, op = _setup(rc)
    sp = mesh.spec
    e = rc.experiment
    g = Nonlinearity.from_dict(e["nonlinearity"])
    mu, notes = _measure(rc, op)
    out = Outcome()
    out.notes += notes
    if e["gate"]:
        sub = criticality_gate(g, sp, mu)
        out.metrics["subcritical"] = {"subcritical": sub.subcritical, "p_star": p_star(sp.N, sp.s, sp.gamma)}
    cfg = SolverConfig.from_dict(rc.solver)
    if e["method"] == "monotone":
        lo, hi, rep = monotone_solve(op, g, mu, cfg)
        u = lo.with_values(0.5 * (lo.values + hi.values), "u")
        out.gates["solve:bracket_closed"] = rep.sandwich_violation <= 10 * cfg.tol
    else:
        u, rep = picard_solve(op, g, mu, cfg)
        out.gates["solve:sandwich"] = rep.sandwich_violation <= 1e-8
    F = op.apply_measure(mu).values
    gu = g(u.values)
    res = u.values + op.A @ gu - F
    out.gates["solve:converged"] = bool(rep.converged)
    cols = ["x"] if sp.N == 1 else ["x", "y"]
    rows = [[*p, d, a, b, r] for p, d, a, b, r in zip(mesh.nodes.tolist(), mesh.delta, u.values, gu, res)]
    out.tables["solution"] = (cols + ["delta", "u", "g_u", "residual"], rows)
    report = rep.to_dict()
    report.pop("wall_time", None)
    out.metrics.update({"report": report, "measure": mu.to_dict() if mu.density is None else
                        {"atoms": mu.to_dict()["atoms"], "density": "grid"},
                        "nonlinearity": g.to_dict(), "label": backend.label})
    return out


def cmd_kato(rc: RunConfig) -> Outcome:
    """Kato inequalities and the convex-profile family."""
    backend, _, op = _setup(rc)
    out = Outcome()
    if _is_estimate(backend):
        out.notes.append("estimate-class kernel: the discrete Kato inequalities carry no guarantee here")
    out.add_checks("kato", suites.kato_suite(op, rc.experiment["tol"], tuple(rc.experiment["ks"])))
    return out


def cmd_boundary(rc: RunConfig) -> Outcome:
    """Dirac marching to the boundary and Martin source decay."""
    e = rc.experiment
    plan = ExperimentPlan(kernel=rc.kernel, mesh={**rc.mesh, "resolution": e["resolution"] or rc.mesh["resolution"]}, p=e["p"],
                          z=tuple(np.atleast_1d(e["z"]).tolist()), n_steps=e["n_steps"], ray=tuple(e["ray"]),
                          solver=rc.solver)
    out = Outcome()
    out.absorb(boundary_singularity_run(plan))
    out.absorb(martin_source_decay(plan, e["d_max"], e["d_min"], e["compare_p"], e["audit_points"]))
    return out


def cmd_sweep(rc: RunConfig) -> Outcome:
    """Criticality sweep of the envelope mass over a mesh ladder."""
    e = rc.experiment
    extra = {"bounded": Nonlinearity.from_dict(e["bounded_g"])} if e["bounded_g"] else None
    ladder = tuple((int(n), float(d)) for n, d in e["ladder"])
    out = Outcome()
    out.absorb(criticality_sweep(rc.kernel, e["ps"], ladder, e["grading"], e["fixed_depth"], extra=extra))
    return out


def cmd_stability(rc: RunConfig) -> Outcome:
    """Mollified-Dirac stability under scale halving."""
    e = rc.experiment
    out = Outcome()
    mesh = {**rc.mesh, "resolution": e["resolution"] or rc.mesh["resolution"]}
    out.absorb(stability_run(rc.kernel, np.atleast_1d(e["z0"]), e["scales"], mesh, e["floor_cells"], e["weight"]))
    return out


def cmd_verify(rc: RunConfig) -> Outcome:
    """Umbrella run of the property suites."""
    backend, mesh, op = _setup(rc)
    e = rc.experiment
    est = _is_estimate(backend)
    runners = {
        "operator": lambda: suites.operator_suite(op),
        "envelope": lambda: suites.envelope_suite(backend, rc.seed),
        "martin": lambda: suites.martin_suite(backend),
        "duality": lambda: suites.duality_suite(op),
        "kato": lambda: [] if est else suites.kato_suite(op, e["kato_tol"]),
        "solver": lambda: suites.solver_suite(op, rc.solver["tol"], monotone=not est),
        "marcinkiewicz": lambda: suites.marcinkiewicz_suite(mesh, mesh.spec.gamma, rc.seed),
    }
    names = list(e["suites"])
    with ThreadPoolExecutor(max_workers=rc.workers) as pool:
        results = list(pool.map(lambda n: runners[n](), names))    # map keeps submission order
    out = Outcome()
    summary = []
    for name, checks in zip(names, results):
        if name == "kato" and est:
            out.notes.append("kato suite skipped: estimate-class kernel has no discrete comparison principle")
            summary.append([name, 0, 0, "skipped"])
            continue
        if name == "solver" and est:
            out.notes.append("monotone bracket skipped: estimate-class kernel has no discrete comparison principle")
        n_fail = sum(not c.passed for c in checks)
        summary.append([name, len(checks), n_fail, "pass" if n_fail == 0 else "fail"])
        for c in checks:
            out.gates[f"{c.suite}:{c.check}"] = bool(c.passed)
    out.tables["verify_summary"] = (["suite", "checks", "failed", "status"], summary)
    out.tables["verify_checks"] = (suites.HEADER, [c.row() for checks in results for c in checks])
    out.metrics = {"label": backend.label, "n": mesh.n}
    return out


HANDLERS = {"kernel-check": cmd_kernel_check, "norms": cmd_norms, "solve": cmd_solve, "kato": cmd_kato,
            "boundary": cmd_boundary, "sweep": cmd_sweep, "stability": cmd_stability, "verify": cmd_verify}


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlgreen", description="Green-operator solver and property checks.")
    ap.add_argument("--version", action="version", version=f"nlgreen {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=(HANDLERS[name].__doc__ or name).strip().splitlines()[0])
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", help=f"one of {', '.join(sorted(PRESETS) + sorted(PRESET_ALIASES))}")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. kernel.s=0.3 (repeatable)")
        p.add_argument("--seed", type=int, help="64-bit seed (default 0)")
        p.add_argument("--out", help="output directory (default $NLGREEN_OUTPUT_DIR or ./nlgreen_out)")
    return ap


def dispatch(argv=None) -> int:
    """Run one command; returns the exit status."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = build_config(args.command, preset=args.preset, path=args.config, overrides=args.overrides,
                          seed=args.seed, out=args.out)
    except ConfigError as exc:
        print(f"nlgreen: config error: {exc}", file=sys.stderr)
        return 2
    for note in rc.notes:
        print(f"nlgreen: note: {note}", file=sys.stderr)
    try:
        out = HANDLERS[args.command](rc)
    except ConfigError as exc:
        print(f"nlgreen: config error: {exc}", file=sys.stderr)
        return 2
    except NLGreenError as exc:
        kind = type(exc).__name__.replace("Error", "").lower()
        print(f"nlgreen: {kind}: {exc}", file=sys.stderr)
        return 1
    try:
        emit(rc, out)
    except OSError as exc:
        print(f"nlgreen: {exc}", file=sys.stderr)
        return 2
    failed = [k for k, v in out.gates.items() if not v]
    status = "pass" if not failed else f"fail ({len(failed)} of {len(out.gates)} gates)"
    print(f"{args.command}: {status}; output in {rc.output_dir}")
    for k in failed[:10]:
        print(f"  failed: {k}")
    return 0 if not failed else 1


def main(argv=None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
