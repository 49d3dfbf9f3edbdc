"""Command-line front end.

Subcommands wire the pipeline: ``plan`` expands flat outputs to a reference
trajectory CSV, ``linearize`` dumps the error-dynamics matrices, ``lqr-synth``
tabulates gains to a .npz file, ``simulate`` runs a scenario to a log CSV, and
``benchmark`` measures wall time across discretizations. Every command writes
a JSON manifest next to its outputs (atomically) so a run can be reproduced.

Exit codes: 0 success, 2 configuration/validation error, 3 diverged rollout,
4 internal numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .control import GainSchedule
from .dynamics import accelerations
from .errors import (
    DegenerateTensionError,
    DivergenceError,
    FlatnessSingularityError,
    NumericalError,
    ValidationError,
)
from .flatness import expand, tethered_expand
from .linearization import build_A, build_B, build_C, state_block_slices
from .logs import plan_header, plan_row, write_benchmark_csv, write_log_csv
from .model import node_positions
from .sim import benchmark as run_benchmark, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NUMERIC = 4


def _resolve_config(name: str) -> Path:
    """Accept a filesystem path or the stem of a bundled example config."""
    path = Path(name)
    if path.exists():
        return path
    if os.sep not in name and not name.endswith(".ini"):
        candidate = resources.files("flexhose").joinpath(f"configs/{name}.ini")
        if candidate.is_file():
            return Path(str(candidate))
    raise ConfigError(f"config {name!r} not found (no such file or bundled config)")


def _write_manifest(out_dir: Path, name: str, payload: dict) -> Path:
    path = out_dir / name
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


def _manifest_payload(cfg: RunConfig, args, outputs: list, wall: float, extra=None) -> dict:
    payload = {
        "tool": "flexhose",
        "version": __version__,
        "config": str(cfg.source),
        "params": cfg.params.to_dict(),
        "seed": cfg.scenario.seed if cfg.scenario else None,
        "outputs": [str(p) for p in outputs],
        "wall_seconds": wall,
        "overrides": {k: v for k, v in vars(args).items() if k in
                      ("seed", "dt", "duration", "log_rate", "gain_file") and v is not None},
    }
    if extra:
        payload.update(extra)
    return payload


def _overrides(args) -> dict:
    return {
        "seed": args.seed,
        "dt": args.dt,
        "duration": args.duration,
        "log_rate": args.log_rate,
    }


def cmd_simulate(args) -> int:
    cfg = load_config(_resolve_config(args.config), _overrides(args))
    if cfg.scenario is None:
        raise ConfigError("[scenario]: section required for simulate")
    scenario = cfg.scenario
    if args.gain_file:
        scenario.gain_schedule = GainSchedule.load(args.gain_file)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    result = run(scenario)
    wall = time.perf_counter() - started
    log_path = out_dir / "log.csv"
    write_log_csv(log_path, cfg.params, result.records)
    outputs = [log_path]
    manifest = _write_manifest(
        out_dir,
        "manifest.json",
        _manifest_payload(cfg, args, outputs, wall, {"diverged": result.diverged}),
    )
    print(f"wrote {log_path} ({len(result.records)} records) and {manifest}")
    if result.diverged:
        print("rollout diverged; log truncated", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _reference_points(cfg: RunConfig, grid) -> list:
    scenario = cfg.scenario
    if scenario.mode == "trajectory":
        return [expand(scenario.flat, cfg.params, float(t)) for t in grid]
    if scenario.mode == "tethered":
        return [tethered_expand(scenario.flat, cfg.params, float(t)) for t in grid]
    if scenario.mode == "setpoint":
        from dataclasses import replace

        from .flatness import solve_static_shape

        _, eq = solve_static_shape(cfg.params, scenario.x0_target, scenario.quad_targets)
        return [replace(eq, t=float(t)) for t in grid]
    raise ConfigError(f"[scenario]: mode {scenario.mode!r} has no reference trajectory")


def cmd_plan(args) -> int:
    cfg = load_config(_resolve_config(args.config), _overrides(args))
    if cfg.scenario is None:
        raise ConfigError("[scenario]: section required for plan")
    scenario = cfg.scenario
    grid_dt = args.grid_dt or scenario.control_dt
    grid = np.arange(0.0, scenario.duration + grid_dt / 2, grid_dt)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    points = _reference_points(cfg, grid)
    rows = []
    for point in points:
        acc = accelerations(cfg.params, point.state, point.input)
        residual = max(
            float(np.abs(acc.dv0 - point.accel.dv0).max()),
            float(np.abs(acc.domega - point.accel.domega).max()),
            float(np.abs(acc.dOmega - point.accel.dOmega).max()),
        )
        rows.append(plan_row(cfg.params, point, node_positions(cfg.params, point.state), residual))
    wall = time.perf_counter() - started
    plan_path = out_dir / "plan.csv"
    import csv as _csv

    with open(plan_path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(plan_header(cfg.params))
        writer.writerows(rows)
    manifest = _write_manifest(out_dir, "manifest.json", _manifest_payload(cfg, args, [plan_path], wall))
    print(f"wrote {plan_path} ({len(rows)} samples) and {manifest}")
    return EXIT_OK


def cmd_linearize(args) -> int:
    cfg = load_config(_resolve_config(args.config), _overrides(args))
    if cfg.scenario is None:
        raise ConfigError("[scenario]: section required for linearize")
    times = [float(t) for t in args.times.split(",")] if args.times else [0.0]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    points = _reference_points(cfg, times)
    slices = state_block_slices(cfg.params)
    dump_path = out_dir / "linearization.txt"
    with open(dump_path, "w") as fh:
        fh.write(f"# error-state blocks: "
                 + ", ".join(f"{k}=[{s.start}:{s.stop}]" for k, s in slices.items())
                 + "\n")
        for point in points:
            for name, M in (
                ("A", build_A(point, cfg.params)),
                ("B", build_B(point, cfg.params)),
                ("C", build_C(point, cfg.params)),
            ):
                fh.write(f"# t={point.t!r} {name} shape={M.shape[0]}x{M.shape[1]} row-major\n")
                for row in M:
                    fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    wall = time.perf_counter() - started
    manifest = _write_manifest(out_dir, "manifest.json", _manifest_payload(cfg, args, [dump_path], wall))
    print(f"wrote {dump_path} and {manifest}")
    return EXIT_OK


def cmd_lqr_synth(args) -> int:
    cfg = load_config(_resolve_config(args.config), _overrides(args))
    if cfg.scenario is None or cfg.scenario.controller != "lqr":
        raise ConfigError("[controller]: lqr-synth needs kind = lqr")
    scenario = cfg.scenario
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    from .sim import _build_lqr, _DesiredProvider
    from .flatness import solve_static_shape

    if scenario.mode == "setpoint":
        _, eq = solve_static_shape(cfg.params, scenario.x0_target, scenario.quad_targets)
        provider = _DesiredProvider(lambda t: eq)
    elif scenario.mode == "trajectory":
        provider = _DesiredProvider(lambda t: expand(scenario.flat, cfg.params, t))
    else:
        raise ConfigError("[scenario]: lqr-synth needs setpoint or trajectory mode")
    schedule = _build_lqr(scenario, provider)
    wall = time.perf_counter() - started
    gain_path = out_dir / "gains.npz"
    schedule.save(gain_path)
    manifest = _write_manifest(out_dir, "manifest.json", _manifest_payload(cfg, args, [gain_path], wall))
    print(f"wrote {gain_path} ({len(schedule.t)} samples) and {manifest}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = load_config(_resolve_config(args.config), {})
    if cfg.benchmark is None:
        raise ConfigError("[benchmark]: section required for benchmark")
    spec = cfg.benchmark
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    rows = run_benchmark(
        spec.n_list,
        duration=spec.duration,
        dt=spec.dt,
        total_length=spec.total_length,
        total_mass=spec.total_mass,
        quad_mass=spec.quad_mass,
        quad_inertia_diag=spec.quad_inertia_diag,
        span_fraction=spec.span_fraction,
    )
    wall = time.perf_counter() - started
    table_path = out_dir / "benchmark.csv"
    write_benchmark_csv(table_path, rows)
    manifest = _write_manifest(out_dir, "manifest.json", _manifest_payload(cfg, args, [table_path], wall))
    print(f"wrote {table_path} and {manifest}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexhose",
        description="Simulation, flat trajectory planning, and LQR control "
        "for a flexible hose carried by multiple quadrotors.",
    )
    parser.add_argument("--version", action="version", version=f"flexhose {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="config file path or bundled name")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--duration", type=float, default=None)
        p.add_argument("--log-rate", type=float, default=None, dest="log_rate")

    p = sub.add_parser("simulate", help="run a scenario rollout to a CSV log")
    common(p)
    p.add_argument("--gain-file", default=None, dest="gain_file",
                   help="use a gain schedule from lqr-synth instead of recomputing")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("plan", help="expand flat outputs to a reference trajectory CSV")
    common(p)
    p.add_argument("--grid-dt", type=float, default=None, dest="grid_dt")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("linearize", help="dump error-dynamics matrices at sample times")
    common(p)
    p.add_argument("--times", default=None, help="comma-separated sample times (default 0)")
    p.set_defaults(fn=cmd_linearize)

    p = sub.add_parser("lqr-synth", help="tabulate Riccati gains to a .npz file")
    common(p)
    p.set_defaults(fn=cmd_lqr_synth)

    p = sub.add_parser("benchmark", help="discretization-scaling wall-time study")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(fn=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlatnessSingularityError, DegenerateTensionError) as exc:
        # bad flat outputs are a configuration problem, not an internal fault
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NumericalError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
