"""Command line entry point: plan, bench, sweep, validate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .bench import (
    BenchConfig,
    ConfigError,
    ExportError,
    compute_metrics,
    export_report,
    export_trajectory,
    import_trajectory,
    load_config,
    run_benchmark,
    scaling_sweep,
)
from .graphs import default_reconfig_params
from .planners import METHODS, validate_trajectory
from .solvers import InfeasibleError
from .surface import MeshError, compute_targets

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3

log = logging.getLogger("surfcover")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config; explicit flags override its values")
    p.add_argument("--surface", help="benchmark kind or mesh file (.obj/.ply)")
    p.add_argument("--n", type=int, help="target count for generated surfaces")
    p.add_argument("--robot", help="bundled robot name or model file")
    p.add_argument("--tolerance", help="tolerance preset (free-spin, wok, brush, full-6dof, position-only)")
    p.add_argument("--samples", type=int, help="IK samples per target (default 100)")
    p.add_argument("--alpha", type=float, help="orientation weight of the Cartesian distance (default 0.1)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--stagnation-secs", type=float)
    p.add_argument("--time-cap-secs", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="surfcover", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one trajectory and print its metrics")
    _common(p)
    p.add_argument("--method", choices=sorted(METHODS), default="h-joint-gtsp")

    p = sub.add_parser("bench", help="repeat every method and report mean/std")
    _common(p)
    p.add_argument("--method", choices=sorted(METHODS), action="append", help="repeatable; default all")
    p.add_argument("--repeats", type=int, help="repeats per method (default 10)")

    p = sub.add_parser("sweep", help="bench at several target densities")
    _common(p)
    p.add_argument("--method", choices=sorted(METHODS), action="append", help="repeatable; default all")
    p.add_argument("--repeats", type=int)
    p.add_argument("--n-values", default="30,60,120", help="comma-separated densities")

    p = sub.add_parser("validate", help="re-check an exported trajectory")
    _common(p)
    p.add_argument("trajectory", help="trajectory file (.json or .csv)")
    return parser


def resolve_config(args: argparse.Namespace) -> BenchConfig:
    cfg = load_config(args.config) if args.config else BenchConfig()
    over = {}
    for flag, key in [
        ("surface", "surface"),
        ("robot", "robot"),
        ("tolerance", "tolerance"),
        ("samples", "samples"),
        ("alpha", "alpha"),
        ("seed", "master_seed"),
        ("stagnation_secs", "stagnation_secs"),
        ("time_cap_secs", "time_cap"),
        ("repeats", "repeats"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            over[key] = value
    method = getattr(args, "method", None)
    if method:
        over["methods"] = (method,) if isinstance(method, str) else tuple(method)
    if over.get("surface", cfg.surface) != cfg.surface:
        over["surface_params"] = {}
    cfg = replace(cfg, **over)
    if args.n is not None:
        cfg = cfg.with_density(args.n)
    return cfg


def _outdir(args) -> Optional[Path]:
    if not args.out:
        return None
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc.strerror or exc}") from exc
    return out


def _metrics_dict(m) -> dict:
    return {
        "reconfigurations": m.reconfigurations,
        "joint_movement": m.movement,
        "max_position_error": m.max_position_error,
        "max_rotation_error": m.max_rotation_error,
    }


def cmd_plan(args) -> int:
    cfg = resolve_config(args)
    mesh, chain, tol = cfg.mesh(), cfg.chain(), cfg.tolerance_spec()
    method = cfg.methods[0]
    t0 = time.perf_counter()
    traj = METHODS[method](mesh, chain, tol, cfg.params(cfg.master_seed))
    elapsed = time.perf_counter() - t0
    metrics = _metrics_dict(compute_metrics(traj, compute_targets(mesh), chain, tol))
    metrics.update(method=method, n=mesh.n, seed=cfg.master_seed, time=elapsed)
    print(json.dumps(metrics, indent=1))
    out = _outdir(args)
    if out is not None:
        export_trajectory(traj, "json", out / "trajectory.json")
        export_trajectory(traj, "csv", out / "trajectory.csv")
        (out / "metrics.json").write_text(json.dumps(metrics, indent=1) + "\n")
    return EXIT_OK


def _finish_reports(reports, args, stem: str) -> int:
    print(export_report(reports), end="")
    out = _outdir(args)
    if out is not None:
        export_report(reports, "table-text", out / f"{stem}.txt")
        export_report(reports, "json", out / f"{stem}.json")
    return EXIT_INFEASIBLE if any(r.failures == r.repeats for r in reports) else EXIT_OK


def cmd_bench(args) -> int:
    return _finish_reports(run_benchmark(resolve_config(args)), args, "report")


def cmd_sweep(args) -> int:
    try:
        n_values = [int(v) for v in args.n_values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--n-values", f"expected comma-separated integers, got {args.n_values!r}") from None
    if args.n is not None:
        raise ConfigError("--n", "use --n-values with sweep")
    return _finish_reports(scaling_sweep(resolve_config(args), n_values), args, "sweep")


def cmd_validate(args) -> int:
    cfg = resolve_config(args)
    mesh, chain, tol = cfg.mesh(), cfg.chain(), cfg.tolerance_spec()
    traj = import_trajectory(args.trajectory)
    targets = compute_targets(mesh)
    if sorted(traj.order) != list(range(mesh.n)):
        print(f"invalid: trajectory covers {len(traj)} steps, surface has {mesh.n} targets")
        return EXIT_INVALID
    problems = validate_trajectory(traj, targets, chain, tol, default_reconfig_params(mesh, targets, cfg.alpha), cfg.alpha)
    for msg in problems:
        print(f"invalid: {msg}")
    if problems:
        return EXIT_INVALID
    print(json.dumps(_metrics_dict(compute_metrics(traj, targets, chain, tol)), indent=1))
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "bench": cmd_bench, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, MeshError, ExportError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
