"""Command-line entry point: ``slrecon --shape circle --emit-metrics``."""
from __future__ import annotations

import argparse
import os
import sys
import time

from . import _accel
from .cloud import SHAPE_KINDS, ShapeSpec, load_cloud, sample_shape
from .driver import RunEntry, ScheduleConfig, default_runs, run_schedule
from .errors import ConfigError, ReconError
from .io import OutputSpec, write_field_vtk, write_metrics_csv

_SHAPE_DIMS = {"circle": 2, "square45": 2, "sphere": 3, "cube_spheres": 3}
_DEFAULT_POINTS = {"circle": 64, "square45": 24, "sphere": 2562, "cube_spheres": 2000}


class UsageError(Exception):
    pass


def _run_param(text: str) -> RunEntry:
    try:
        r, p, delta = text.split(":")
        return RunEntry(int(r), int(p), float(delta))
    except (ValueError, ConfigError) as exc:
        raise argparse.ArgumentTypeError(f"expected r:p:delta, got {text!r} ({exc})") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="slrecon",
        description="Reconstruct a curve or surface from a point cloud with a level-set evolution.",
    )
    src = ap.add_argument_group("input")
    src.add_argument("--input", metavar="PATH", help="point cloud file (.xyz or .ply)")
    src.add_argument("--format", choices=("xyz", "ply"), help="override format detection")
    src.add_argument("--shape", choices=SHAPE_KINDS, help="use a synthetic cloud instead of --input")
    src.add_argument("--radius", type=float, help="circle/sphere radius")
    src.add_argument("--edge", type=float, help="square/cube edge length")
    src.add_argument("--n-points", type=int, help="number of synthetic samples")
    src.add_argument("--dim", type=int, choices=(2, 3), help="expected dimension (checked against the cloud)")

    sch = ap.add_argument_group("schedule")
    sch.add_argument("--runs", type=int, help="number of runs (default 3)")
    sch.add_argument("--interp", choices=("q1", "weno"), help="interpolator (default weno)")
    sch.add_argument("--ks", type=float, help="initial-data threshold multiplier K_S (default 2.0)")
    sch.add_argument("--fine-start", action="store_true", default=None, help="start at dx = h_S/2")
    sch.add_argument("--seed", type=int, help="seed for the resolution estimate (default 0)")
    sch.add_argument("--run-param", action="append", type=_run_param, metavar="R:P:DELTA",
                     help="override p and delta of run R (repeatable)")
    sch.add_argument("--max-iter", type=int, help="iteration cap per run (default 100)")
    sch.add_argument("--min-iter", type=int, help="iteration floor per run (default 10)")
    sch.add_argument("--tol", type=float, help="energy stagnation tolerance (default 1e-4)")
    sch.add_argument("--threads", type=int, help="numba worker threads")

    out = ap.add_argument_group("output")
    out.add_argument("--out", metavar="PREFIX", help="output path prefix (default slrecon_out)")
    out.add_argument("--emit-fields", action="store_true", default=None, help="write one VTK file per run")
    out.add_argument("--emit-metrics", action="store_true", default=None, help="write the metrics CSV")
    out.add_argument("--exact-shape", choices=SHAPE_KINDS, help="analytic shape for the L1 error column")
    out.add_argument("--no-timing", action="store_true", default=None, help="leave wall_ms empty (reproducible CSV)")
    out.add_argument("--config", metavar="FILE", help="key=value file; command-line flags take precedence")
    return ap


_CONFIG_TYPES = {
    "input": str, "format": str, "shape": str, "radius": float, "edge": float, "n_points": int,
    "dim": int, "runs": int, "interp": str, "ks": float, "fine_start": "bool", "seed": int,
    "max_iter": int, "min_iter": int, "tol": float, "threads": int, "out": str,
    "emit_fields": "bool", "emit_metrics": "bool", "exact_shape": str, "no_timing": "bool",
    "run_param": "runs",
}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path) -> dict:
    """Parse a ``key = value`` file; keys use the long flag names (dashes or underscores)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        kind = _CONFIG_TYPES.get(key)
        if kind is None:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            if kind == "bool":
                out[key] = _bool(value)
            elif kind == "runs":
                out[key] = [_run_param(v) for v in value.split(",") if v.strip()]
            else:
                out[key] = kind(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return out


def _merge(args: argparse.Namespace) -> argparse.Namespace:
    defaults = dict(runs=3, interp="weno", ks=2.0, fine_start=False, seed=0, max_iter=100, min_iter=10,
                    tol=1e-4, out="slrecon_out", emit_fields=False, emit_metrics=False, no_timing=False)
    conf = load_config(args.config) if args.config else {}
    for key, value in conf.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key, value in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _shape_params(args) -> dict:
    params = {}
    if args.radius is not None:
        params["radius"] = args.radius
    if args.edge is not None:
        params["edge"] = args.edge
    return params


def _schedule(args) -> ScheduleConfig:
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    runs = {e.r: e for e in default_runs(args.runs)}
    for entry in args.run_param or []:
        if entry.r > args.runs:
            raise UsageError(f"--run-param refers to run {entry.r} but only {args.runs} runs are scheduled")
        runs[entry.r] = entry
    try:
        return ScheduleConfig(
            runs=[runs[r] for r in sorted(runs)],
            dx_rule="fine" if args.fine_start else "standard",
            K_S=args.ks,
            seed=args.seed,
            min_iters=args.min_iter,
            max_iters=args.max_iter,
            tol=args.tol,
            interpolator=args.interp,
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _cloud(args):
    if args.input and args.shape:
        raise UsageError("give either --input or --shape, not both")
    if args.input:
        if not os.path.isfile(args.input):
            raise UsageError(f"input file not found: {args.input}")
        cloud = load_cloud(args.input, args.format)
    elif args.shape:
        n = args.n_points or _DEFAULT_POINTS[args.shape]
        try:
            cloud = sample_shape(ShapeSpec(args.shape, n, _shape_params(args)), seed=args.seed)
        except ReconError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("one of --input or --shape is required")
    if args.dim is not None and args.dim != cloud.dim:
        raise UsageError(f"--dim {args.dim} does not match the {cloud.dim}D cloud")
    return cloud


def _exact(args, cloud):
    if not args.exact_shape:
        return None
    if _SHAPE_DIMS[args.exact_shape] != cloud.dim:
        raise UsageError(f"--exact-shape {args.exact_shape} is {_SHAPE_DIMS[args.exact_shape]}D but the cloud is {cloud.dim}D")
    try:
        return ShapeSpec(args.exact_shape, max(len(cloud), 4), _shape_params(args))
    except ReconError as exc:
        raise UsageError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge(args)
        cloud = _cloud(args)
        cfg = _schedule(args)
        exact = _exact(args, cloud)
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be positive")
            _accel.set_threads(args.threads)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"slrecon: error: {exc}", file=sys.stderr)
        return 2
    except (ReconError, OSError) as exc:
        print(f"slrecon: error: {exc}", file=sys.stderr)
        return 1

    outspec = OutputSpec(args.out, bool(args.emit_fields), bool(args.emit_metrics))
    t0 = time.perf_counter()
    try:
        result = run_schedule(cloud, cfg, exact=exact, timing=not args.no_timing)
        if outspec.write_fields or outspec.write_metrics:
            outspec.ensure_dir()
        if outspec.write_fields:
            for run in result.runs:
                write_field_vtk(run.phi, outspec.field_path(run.entry.r))
        if outspec.write_metrics:
            write_metrics_csv(result.metrics, outspec.metrics_path)
    except (ReconError, OSError) as exc:
        print(f"slrecon: error: {exc}", file=sys.stderr)
        return 1
    for run in result.runs:
        last = run.metrics[-1]
        print(f"run {run.entry.r}: iterations {len(run.metrics)}, E2 {last.E2:.6e}, "
              f"Err_S {last.err_cloud:.6e}, wall {run.wall_s:.3f} s")
    print(f"total wall {time.perf_counter() - t0:.3f} s")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
