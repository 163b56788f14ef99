"""Command line front end.

    radgraph solve CONFIG [--resolution N] [--tol X] [--override-structure-check] [--out DIR]
    radgraph probe-f SPEC [--samples M] [--dimension N]
    radgraph verify SOLUTION_CSV CONFIG [--resolution N] [--tol X]

Exit codes: 0 success; 1 probe failure; 2 configuration or grid error;
3 no admissible subsolution; 4 continuation stalled; 5 certification failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .continuation import check_structure, make_cap_subsolution, solve, subsolution_from_field
from .curvature import parse_curvature_spec, probe_structure_conditions
from .diagnostics import certify_solution
from .errors import (
    ConfigError,
    ContinuationStalled,
    DomainError,
    InvalidField,
    InvalidResolution,
    NoSubsolution,
    OrderingViolated,
    PreconditionViolation,
    StructureCheckFailed,
    SubsolutionNotStrict,
)
from .geometry import snapshot
from .io import load_config, read_field_for_grid, read_solution_csv, write_json, write_obj, write_solution_csv
from .solver import DirichletProblem, residual

EXIT_OK, EXIT_PROBE, EXIT_CONFIG, EXIT_NO_SUB, EXIT_STALLED, EXIT_CERT = 0, 1, 2, 3, 4, 5

log = logging.getLogger("radgraph")


def _err(msg):
    print(f"radgraph: {msg}", file=sys.stderr)


def build_subsolution(cfg, grid, f, psi):
    spec = dict(cfg.subsolution)
    kind = spec.pop("kind")
    if kind == "cap":
        return make_cap_subsolution(grid, cfg.boundary_rho, float(spec.get("multiplier", 2.0)), psi, f)
    v_bar = read_field_for_grid(spec["path"], grid)
    return subsolution_from_field(grid, v_bar, psi, f)


def _boundary_rho(cfg):
    # a cap subsolution carries the constant boundary value; a file subsolution its own
    return cfg.boundary_rho if cfg.subsolution["kind"] == "cap" else None


def target_problem(grid, f, psi, sub):
    def rhs(v):
        X = np.exp(-v)[:, None] * grid.points
        return psi(X), -np.sum(psi.gradient(X) * X, axis=-1)

    return DirichletProblem(grid, sub.v, rhs, f)


def cmd_solve(args):
    try:
        cfg = load_config(args.config)
        if args.override_structure_check:
            cfg.override_structure_check = True
        if args.out:
            cfg.output = args.out
        if args.resolution:
            cfg.resolution = args.resolution
        if args.tol is not None:
            cfg.newton = dict(cfg.newton, tol=args.tol)
        cfg.validate()
        grid = cfg.build_grid()
        f, psi, settings = cfg.curvature_function(), cfg.psi_function(), cfg.newton_settings()
    except (ConfigError, DomainError, InvalidResolution, ValueError) as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.as_dict())
    report = {"config": cfg.as_dict(), "grid_hash": grid.hash(), "nodes": grid.size}

    t0 = time.perf_counter()
    try:
        probe = check_structure(f, cfg.override_structure_check)
        sub = build_subsolution(cfg, grid, f, psi)
        report["subsolution"] = {"cap_curvature": sub.cap_curvature, "K": sub.K}
        outcome = solve(grid, f, psi, sub, settings, probe=probe)
    except StructureCheckFailed as exc:
        _err(f"structure probe failed: {exc}; pass --override-structure-check to run anyway")
        return EXIT_CONFIG
    except InvalidField as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except (NoSubsolution, SubsolutionNotStrict) as exc:
        _err(f"no subsolution: {exc}")
        report["status"] = "no_subsolution"
        report["message"] = str(exc)
        write_json(out / "report.json", report)
        return EXIT_NO_SUB
    except (ContinuationStalled, OrderingViolated, PreconditionViolation) as exc:
        _err(f"continuation stopped: {exc}")
        report["status"] = "stalled"
        report["message"] = str(exc)
        partial = getattr(exc, "report", None)
        if partial is not None:
            report["last_t"] = exc.last_t
            report["partial_stage"] = partial.as_dict()
        write_json(out / "report.json", report)
        return EXIT_STALLED
    elapsed = time.perf_counter() - t0

    snap = snapshot(grid, outcome.v)
    problem = target_problem(grid, f, psi, sub)
    cert = certify_solution(snap, problem, sub, tol=settings.tol, boundary_rho=_boundary_rho(cfg))
    res = residual(problem, outcome.v).values
    write_solution_csv(out / "solution.csv", grid, snap, res)
    write_obj(out / "surface.obj", grid, snap.X)
    report.update(
        status="solved",
        runtime_seconds=elapsed,
        epsilon=outcome.epsilon,
        K=outcome.K,
        probe=outcome.probe.as_dict(),
        stage1=outcome.stage1.as_dict(),
        stage2=outcome.stage2.as_dict(),
        certificate=cert.as_dict(),
        all_pass=cert.all_pass,
    )
    write_json(out / "report.json", report)
    print(json.dumps({"status": "solved", "all_pass": cert.all_pass, "flags": cert.flags, "output": str(out)}))
    return EXIT_OK if cert.all_pass else EXIT_CERT


def cmd_probe_f(args):
    spec = args.spec
    try:
        if spec.lstrip().startswith("{"):
            spec = json.loads(spec)
        f = parse_curvature_spec(spec, args.dimension)
        report = probe_structure_conditions(f, m=args.samples)
    except (ValueError, KeyError, TypeError) as exc:
        _err(f"cannot parse curvature spec: {exc}")
        return EXIT_CONFIG
    out = report.as_dict()
    out["function"] = f.name
    print(json.dumps(out, indent=2))
    return EXIT_OK if report.required_pass else EXIT_PROBE


def cmd_verify(args):
    try:
        cfg = load_config(args.config)
        grid = cfg.build_grid(args.resolution)
        f, psi = cfg.curvature_function(), cfg.psi_function()
        tol = cfg.newton_settings(args.tol).tol
        ghash, cols = read_solution_csv(args.solution)
    except (ConfigError, DomainError, InvalidResolution, InvalidField, ValueError) as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    if ghash != grid.hash() or cols["node"].size != grid.size:
        _err("solution file was written on a different grid")
        return EXIT_CONFIG
    order = np.argsort(cols["node"])
    cols = {k: c[order] for k, c in cols.items()}
    try:
        sub = build_subsolution(cfg, grid, f, psi)
        v = grid.check(cols["v"], "v")
        snap = snapshot(grid, v)
    except (NoSubsolution, InvalidField) as exc:
        _err(str(exc))
        return EXIT_CERT
    except Exception as exc:  # a tampered field may not even be a radial graph
        _err(f"cannot evaluate stored field: {exc}")
        return EXIT_CERT
    problem = target_problem(grid, f, psi, sub)
    cert = certify_solution(snap, problem, sub, tol=tol, boundary_rho=_boundary_rho(cfg))
    # stored derived columns must match the stored v
    stored = np.column_stack([cols["u"], cols["rho"], cols["beta"]] + [cols[f"kappa_{i + 1}"] for i in range(grid.n)])
    fresh = np.column_stack([snap.u, snap.rho, snap.beta, snap.kappa])
    mismatch = float(np.max(np.abs(stored - fresh) / np.maximum(np.abs(fresh), 1.0)))
    flags = dict(cert.flags, stored_fields_consistent=bool(mismatch <= 1e-9))
    out = cert.as_dict()
    out["flags"] = flags
    out["observed"]["stored_field_mismatch"] = mismatch
    out["all_pass"] = all(flags.values())
    print(json.dumps(out, indent=2))
    return EXIT_OK if out["all_pass"] else EXIT_CERT


def build_parser():
    p = argparse.ArgumentParser(prog="radgraph", description="Prescribed curvature radial graphs over spherical domains.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the Dirichlet problem described by a JSON config")
    s.add_argument("config")
    s.add_argument("--resolution", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--override-structure-check", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("probe-f", help="probe the structure conditions of a curvature function")
    s.add_argument("spec", help='e.g. "sigma_k_root:n=2,k=2" or a JSON object')
    s.add_argument("--samples", type=int, default=400)
    s.add_argument("--dimension", type=int)
    s.set_defaults(func=cmd_probe_f)

    s = sub.add_parser("verify", help="re-certify a stored solution")
    s.add_argument("solution")
    s.add_argument("config")
    s.add_argument("--resolution", type=int)
    s.add_argument("--tol", type=float)
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
