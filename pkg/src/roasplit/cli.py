"""Command-line entry points: single runs and batch sweeps.

``roasplit run`` compiles, solves and analyzes one instance, writing a
versioned result JSON, a grid CSV for plotting and a run manifest.
``roasplit sweep`` repeats runs along a degree or cell-count axis and
aggregates (value, nnz, time, volume) rows into a CSV for trend plots.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    RoaCertificate,
    export_grid_csv,
    identity_residuals,
    volume,
)
from .compiler import (
    DEFAULT_MARGIN,
    compile_problem,
    compile_unsplit,
    problem_size,
    write_cbf,
)
from .geom import TimeGrid, neighbor_facets
from .poly import format_polynomial
from .problem import BUILTIN_NAMES, builtin_problem, load_problem_toml
from .solver import SolveOptions, solve

RESULT_SCHEMA = 1

_DEFAULT_GRID = {1: 1001, 2: 101, 3: 41}


def _parse_cells_spec(spec: str):
    """Cell specifications:

    - "1" or "2x3x2": uniform cell counts per axis
    - "x1=-0.5,0.5;x2=0": explicit cut positions
    - "halving:8:seed=3": seeded random halving to 8 cells
    """
    spec = spec.strip()
    if spec.startswith("halving:"):
        parts = spec.split(":")
        n_cells = int(parts[1])
        seed = 0
        if len(parts) > 2:
            if not parts[2].startswith("seed="):
                raise ValueError(f"bad halving spec {spec!r}")
            seed = int(parts[2][5:])
        return {"n_cells": n_cells, "split_seed": seed}
    if "=" in spec:
        cuts = {}
        for clause in spec.split(";"):
            var, _, positions = clause.partition("=")
            var = var.strip()
            if not var.startswith("x"):
                raise ValueError(f"cuts must name state variables, got {var!r}")
            axis = int(var[1:]) - 1
            cuts[axis] = [float(p) for p in positions.split(",") if p.strip()]
        return {"cuts": cuts}
    counts = [int(c) for c in spec.split("x")]
    if len(counts) == 1:
        return {"cells_per_axis_scalar": counts[0]}
    return {"cells_per_axis": counts}


def _discretize(problem, args):
    kwargs = {}
    if args.cells:
        parsed = _parse_cells_spec(args.cells)
        if "cells_per_axis_scalar" in parsed:
            kwargs["cells_per_axis"] = [parsed["cells_per_axis_scalar"]] * problem.system.n
        else:
            kwargs.update(parsed)
    time_grid = None
    if args.time_knots:
        knots = tuple(float(v) for v in args.time_knots.split(","))
        time_grid = TimeGrid(knots)
    return problem.with_discretization(
        degree=args.degree, time_grid=time_grid, **kwargs
    )


def _load_problem(args):
    if args.config and args.builtin:
        raise ValueError("pass either --config or --builtin, not both")
    if args.config:
        return load_problem_toml(args.config), True
    if args.builtin:
        if args.builtin not in BUILTIN_NAMES:
            raise ValueError(f"unknown builtin {args.builtin!r}; choose from {BUILTIN_NAMES}")
        return builtin_problem(args.builtin), False
    raise ValueError("one of --config or --builtin is required")


def _serialize_estimate(est):
    return {
        "mean": est.mean,
        "std_error": est.std_error,
        "samples": est.samples,
        "seed": est.seed,
    }


def _run_once(problem, args, out_dir: Path, tag: str = "run"):
    out_dir.mkdir(parents=True, exist_ok=True)
    options = SolveOptions(backend=args.backend, tol=args.tol, max_iters=args.max_iters)

    t0 = time.perf_counter()
    if args.unsplit:
        sdp, layout = compile_unsplit(problem, margin=args.margin)
    else:
        sdp, layout = compile_problem(problem, margin=args.margin)
    compile_time = time.perf_counter() - t0
    nnz = problem_size(sdp)
    if args.dump_sdp:
        write_cbf(sdp, args.dump_sdp)

    report = solve(sdp, options)
    t1 = time.perf_counter()
    cert = RoaCertificate.from_solution(layout, report.x)
    volumes = {}
    analyze_time = 0.0
    grid_path = out_dir / f"{tag}_grid.csv"
    if report.ok:
        volumes = {
            "v_set": _serialize_estimate(volume(cert, "v", args.samples, args.seed)),
            "w_set": _serialize_estimate(volume(cert, "w", args.samples, args.seed)),
        }
        resolution = _DEFAULT_GRID.get(layout.problem.system.n, 21)
        export_grid_csv(cert, str(grid_path), resolution)
        analyze_time = time.perf_counter() - t1

    facets = neighbor_facets(layout.problem.cells)
    result = {
        "schema": RESULT_SCHEMA,
        "version": __version__,
        "problem": {
            "name": layout.problem.name,
            "n": layout.problem.system.n,
            "m": layout.problem.system.m,
            "T": layout.problem.T,
            "X": [list(iv) for iv in layout.problem.X],
            "f": [format_polynomial(fj) for fj in layout.problem.system.f],
        },
        "degree": layout.problem.degree,
        "margin": layout.margin,
        "unsplit": bool(args.unsplit),
        "cells": [list(map(list, c.box)) for c in layout.problem.cells],
        "facets": [
            {"pair": [f.a, f.b], "axis": f.axis, "value": f.value, "sign": f.sign}
            for f in facets
        ],
        "time_knots": list(layout.problem.time_grid.knots),
        "nnz": nnz,
        "sdp": {"rows": sdp.n_rows, "cols": sdp.n_cols},
        "solver": {
            "backend": report.backend,
            "status": report.status,
            "iterations": report.iterations,
            "eq_residual": report.eq_residual,
            "min_psd_eig": report.min_psd_eig,
        },
        "objective": report.primal_objective,
        "volumes": volumes,
        "certificate": {
            "v": {f"{i},{k}": format_polynomial(p) for (i, k), p in sorted(cert.v.items())},
            "w": {str(i): format_polynomial(p) for i, p in sorted(cert.w.items())},
        }
        if report.ok
        else {},
        "timings": {
            "compile": compile_time,
            "solve": report.solve_time,
            "analyze": analyze_time,
        },
        "outputs": {"grid_csv": grid_path.name if report.ok else None},
    }
    result_path = out_dir / f"{tag}_result.json"
    result_path.write_text(json.dumps(result, indent=2, sort_keys=True))

    manifest = {
        "config": args.config or f"builtin:{args.builtin}",
        "degree": layout.problem.degree,
        "n_cells": len(layout.problem.cells),
        "time_knots": list(layout.problem.time_grid.knots),
        "nnz": nnz,
        "status": report.status,
        "outputs": [result_path.name] + ([grid_path.name] if report.ok else []),
        "timings": result["timings"],
    }
    (out_dir / f"{tag}_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return result, manifest, report


def cmd_run(args) -> int:
    try:
        problem, _ = _load_problem(args)
        problem = _discretize(problem, args)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    result, manifest, report = _run_once(problem, args, out_dir)
    print(
        f"{result['problem']['name']}: degree {result['degree']}, "
        f"{manifest['n_cells']} cells, nnz {result['nnz']}, "
        f"status {report.status}, objective {result['objective']:.6f}"
    )
    if result["volumes"]:
        vs = result["volumes"]["v_set"]
        print(f"v-set volume {vs['mean']:.4f} +- {vs['std_error']:.4f}")
    return 0 if report.ok else 1


def cmd_sweep(args) -> int:
    try:
        base, from_config = _load_problem(args)
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        if not values:
            raise ValueError("sweep needs at least one value")
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    failures = 0
    for value in values:
        tag = f"{args.axis}_{value}"
        sweep_args = argparse.Namespace(**vars(args))
        if args.axis == "degree":
            sweep_args.degree = int(value)
        else:
            sweep_args.cells = f"halving:{int(value)}:seed={args.seed}"
        try:
            problem = _discretize(base, sweep_args)
            result, manifest, report = _run_once(problem, sweep_args, out_dir, tag=tag)
            vol = result["volumes"].get("v_set", {}).get("mean") if result["volumes"] else None
            rows.append((value, result["nnz"], result["timings"]["solve"], vol))
            print(f"{tag}: nnz {result['nnz']} status {report.status}")
            if not report.ok:
                failures += 1
        except Exception as e:  # keep sweeping, record the failure
            print(f"{tag}: failed ({e})", file=sys.stderr)
            rows.append((value, None, None, None))
            failures += 1
    agg = out_dir / "sweep.csv"
    with open(agg, "w") as fh:
        fh.write("value,nnz,solve_time,v_volume\n")
        for value, nnz, t, vol in rows:
            fh.write(
                ",".join(
                    "" if field is None else (repr(field) if isinstance(field, float) else str(field))
                    for field in (value, nnz, t, vol)
                )
                + "\n"
            )
    print(f"wrote {agg}")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roasplit",
        description="Certified outer approximations of finite-time regions of attraction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="problem TOML file")
        p.add_argument("--builtin", help=f"builtin problem: {', '.join(BUILTIN_NAMES)}")
        p.add_argument("--degree", type=int, default=6, help="relaxation degree (even)")
        p.add_argument("--cells", help="cell spec: '2x2', 'x1=-0.5,0.5' or 'halving:8:seed=0'")
        p.add_argument("--time-knots", help="comma-separated time grid knots")
        p.add_argument("--unsplit", action="store_true", help="compile the one-piece program")
        p.add_argument("--margin", type=float, default=DEFAULT_MARGIN)
        p.add_argument("--seed", type=int, default=0, help="sampling / split seed")
        p.add_argument("--samples", type=int, default=1_000_000, help="Monte-Carlo samples")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--dump-sdp", help="write the compiled SDP in CBF text form")
        p.add_argument("--backend", default="auto", help="solver backend (auto|clarabel|scs)")
        p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
        p.add_argument("--max-iters", type=int, default=None, help="solver iteration cap")

    run_p = sub.add_parser("run", help="compile, solve and analyze one instance")
    common(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="batch runs along a degree or cell axis")
    common(sweep_p)
    sweep_p.add_argument("--axis", choices=("degree", "cells"), required=True)
    sweep_p.add_argument("--values", required=True, help="comma-separated sweep values")
    sweep_p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
