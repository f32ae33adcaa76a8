"""Command-line interface: ``topokit run`` and ``topokit score``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .fem import SolverError, StructuralError
from .optimizer import ConfigError, checkerboard_score, run

log = logging.getLogger("topokit")

EXIT_OK, EXIT_ERROR, EXIT_MAXITER = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topokit", description="Bilevel knapsack topology optimization.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="optimize a benchmark or custom load case")
    r.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    r.add_argument("--problem", choices=["mbb", "cantilever2d", "cantilever3d"])
    r.add_argument("--loadcase", type=Path, help="custom load case JSON (0-based DOFs)")
    r.add_argument("--nelx", type=int)
    r.add_argument("--nely", type=int)
    r.add_argument("--nelz", type=int)
    r.add_argument("--volfrac", type=float)
    r.add_argument("--mu", type=float)
    r.add_argument("--p", type=float)
    r.add_argument("--emin", type=float)
    r.add_argument("--nu", type=float)
    r.add_argument("--symmetry", action="store_true", default=None)
    r.add_argument("--out", type=Path, default=Path("topokit_out"))
    r.add_argument("--solver", choices=["cg", "dense", "direct"])
    r.add_argument("--tol", type=float)
    r.add_argument("--max-iters", dest="max_iters", type=int, help="cap on outer iterations")
    r.add_argument("-q", "--quiet", action="store_true", help="no per-iteration output")

    s = sub.add_parser("score", help="volume fraction and checkerboard count of a density CSV")
    s.add_argument("--csv", type=Path, required=True)
    return ap


def _cmd_run(args) -> int:
    cfg = io.load_config(
        args.config,
        problem=args.problem, nelx=args.nelx, nely=args.nely, nelz=args.nelz,
        volfrac=args.volfrac, mu=args.mu, p=args.p, emin=args.emin, nu=args.nu,
        symmetry=args.symmetry, solver=args.solver, tol=args.tol, max_iters=args.max_iters,
        loadcase=str(args.loadcase) if args.loadcase else None,
    )
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    with io.IterationLog(out / "iterations.jsonl") as itlog:
        def on_iteration(rec):
            itlog.write(rec)
            if not args.quiet:
                print(io.format_iteration(rec), flush=True)

        result = run(cfg, on_iteration=on_iteration)

    io.export_design_image(result.design, result.grid, out / "design.pgm")
    io.export_density_csv(result.design, result.grid, out / "density.csv")
    extra = {}
    if result.grid.ndim == 2:
        extra["checkerboard"] = checkerboard_score(result.design, result.grid)
    io.write_summary(result, out / "summary.json", extra)

    print(f"{result.reason}: {result.n_iterations} iterations, compliance {result.compliance:.4f}")
    if result.reason == "solver-failure":
        print(result.error, file=sys.stderr)
        return EXIT_ERROR
    return EXIT_MAXITER if result.reason == "max-iterations" else EXIT_OK


def _cmd_score(args) -> int:
    img = io.read_density_csv(args.csv)
    grid = io.grid_from_image(img)
    design = grid.from_array(img)
    print(f"elements: {grid.n_elements}")
    print(f"solid: {int(np.count_nonzero(design))}")
    print(f"volume_fraction: {np.count_nonzero(design) / grid.n_elements:.6f}")
    if grid.ndim == 2:
        print(f"checkerboard: {checkerboard_score(design, grid)}")
    else:
        print("checkerboard: n/a (3D)")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_score(args)
    except (ConfigError, SolverError, StructuralError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
