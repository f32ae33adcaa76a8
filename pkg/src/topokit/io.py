"""Config intake, design export (PGM/CSV) and run logs."""
from __future__ import annotations

import json
import os
from dataclasses import fields
from pathlib import Path

import numpy as np

from .fem import LoadCase, MaterialModel
from .mesh import Grid, build_grid
from .optimizer import ConfigError, IterationRecord, RunConfig, RunResult

__all__ = [
    "export_design_image",
    "read_pgm",
    "export_density_csv",
    "read_density_csv",
    "grid_from_image",
    "IterationLog",
    "write_iteration_log",
    "write_summary",
    "format_iteration",
    "load_loadcase",
    "load_config",
]


def _image(design, grid: Grid) -> np.ndarray:
    design = np.asarray(design)
    if not np.isin(design, (0, 1)).all():
        raise ValueError("design must contain only 0 and 1")
    return grid.to_array(design.astype(np.int64))


def _slice_path(path: Path, k: int) -> Path:
    return path.with_name(f"{path.stem}_z{k}{path.suffix}")


def _write_pgm(img: np.ndarray, path: Path) -> None:
    h, w = img.shape
    pixels = np.where(img == 1, 0, 255)
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(map(str, row)) for row in pixels]
    path.write_text("\n".join(lines) + "\n")


def export_design_image(design, grid: Grid, path) -> list[Path]:
    """Write the design as an ASCII PGM (solid black, void white, top row first).

    3D designs are written one file per z-slice, named ``<stem>_z<k><suffix>``.
    Returns the paths written.
    """
    path = Path(path)
    img = _image(design, grid)
    if grid.ndim == 2:
        _write_pgm(img, path)
        return [path]
    out = []
    for k, sl in enumerate(img):
        p = _slice_path(path, k)
        _write_pgm(sl, p)
        out.append(p)
    return out


def read_pgm(path) -> np.ndarray:
    """Read an ASCII (P2) PGM written by :func:`export_design_image` as a 0/1 solid mask."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.array(tokens[4:], dtype=np.int64)
    if pixels.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {pixels.size}")
    return (pixels.reshape(h, w) < maxval / 2).astype(np.int8)


def export_density_csv(design, grid: Grid, path) -> Path:
    """Write ``nely`` rows of ``nelx`` comma-separated 0/1 values, top row first.

    3D designs are written as one block per z-slice, separated by a blank line.
    """
    path = Path(path)
    img = _image(design, grid)
    blocks = [img] if grid.ndim == 2 else list(img)
    text = "\n\n".join("\n".join(",".join(map(str, row)) for row in b) for b in blocks)
    path.write_text(text + "\n")
    return path


def read_density_csv(path) -> np.ndarray:
    """Read a density CSV back to image layout: ``(nely, nelx)`` or ``(nelz, nely, nelx)``."""
    blocks, current = [], []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            current.append([int(v) for v in line.split(",")])
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    if not blocks:
        raise ValueError(f"{path}: empty density file")
    arr = np.array(blocks, dtype=np.int8)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{path}: densities must be 0 or 1")
    return arr[0] if len(blocks) == 1 else arr


def grid_from_image(img: np.ndarray) -> Grid:
    if img.ndim == 2:
        return build_grid((img.shape[1], img.shape[0]))
    return build_grid((img.shape[2], img.shape[1], img.shape[0]))


# --- logs -------------------------------------------------------------------

def _record_json(rec: IterationRecord) -> dict:
    return {
        "iter": rec.iteration,
        "vol_frac": rec.vol_frac,
        "compliance": rec.compliance,
        "changed": rec.changed,
        "solver_iters": rec.solver_iters,
        "wall_ms": round(rec.wall_ms, 3),
    }


class IterationLog:
    """Append-only JSON-lines iteration log; every line is flushed as written."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w")

    def write(self, rec: IterationRecord) -> None:
        self._fh.write(json.dumps(_record_json(rec)) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_iteration_log(records, path) -> Path:
    with IterationLog(path) as log:
        for rec in records:
            log.write(rec)
    return Path(path)


def write_summary(result: RunResult, path, extra: dict | None = None) -> Path:
    cfg = result.config
    summary = {
        "problem": cfg.problem if cfg.loadcase is None else "custom",
        "dims": list(cfg.dims),
        "volfrac": cfg.volfrac,
        "mu": cfg.mu,
        "termination": result.reason,
        "total_iters": result.n_iterations,
        "compliance": result.compliance,
        "solid_count": int(np.count_nonzero(result.design)),
        "n_elements": result.grid.n_elements,
        "total_solver_iters": sum(r.solver_iters for r in result.history),
        "total_wall_ms": round(sum(r.wall_ms for r in result.history), 3),
    }
    if result.error:
        summary["error"] = result.error
    if extra:
        summary.update(extra)
    Path(path).write_text(json.dumps(summary, indent=2) + "\n")
    return Path(path)


def format_iteration(rec: IterationRecord) -> str:
    return (f" It.:{rec.iteration:5d} Obj.:{rec.compliance:11.4f} Vol.:{rec.vol_frac:7.3f}"
            f" ch.:{rec.changed:7d}")


# --- configuration ----------------------------------------------------------

def load_loadcase(path) -> LoadCase:
    """Read ``{"fixed_dofs": [...], "loads": [[dof, value], ...]}`` (0-based DOFs)."""
    try:
        data = json.loads(Path(path).read_text())
        return LoadCase(loads=tuple((int(d), float(v)) for d, v in data["loads"]),
                        fixed_dofs=np.asarray(data["fixed_dofs"], dtype=np.int64))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError("loadcase", f"cannot read {path}: {exc}") from exc


_MATERIAL_KEYS = {"E0": "E0", "emin": "Emin", "nu": "nu", "p": "p"}
_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"material", "loadcase"}
_ALIASES = {"max_iters": "max_outer_iterations"}


def load_config(path=None, **overrides) -> RunConfig:
    """Build a :class:`RunConfig` from an optional JSON file plus overrides.

    Keys: the :class:`RunConfig` field names, ``max_iters`` (alias of
    ``max_outer_iterations``), material keys ``E0``, ``emin``, ``nu``, ``p``,
    and ``loadcase`` (path to a load-case JSON). Overrides whose value is
    ``None`` are ignored, so unset command-line flags never mask the file.
    """
    values: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"malformed JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", f"{path} must contain a JSON object")
        values.update(data)
    values.update({k: v for k, v in overrides.items() if v is not None})

    run_kwargs, mat_kwargs = {}, {}
    for key, val in values.items():
        key = _ALIASES.get(key, key)
        if key in _MATERIAL_KEYS:
            mat_kwargs[_MATERIAL_KEYS[key]] = _number(key, val)
        elif key == "loadcase":
            base = Path(path).parent if path is not None else Path(os.curdir)
            lc = Path(val)
            run_kwargs["loadcase"] = load_loadcase(lc if lc.is_absolute() or path is None else base / lc)
        elif key in _RUN_KEYS:
            run_kwargs[key] = _coerce(key, val)
        else:
            raise ConfigError(key, "unknown configuration key")

    try:
        material = MaterialModel(**mat_kwargs)
    except ValueError as exc:
        name = str(exc).split()[0]
        inverse = {v: k for k, v in _MATERIAL_KEYS.items()}
        raise ConfigError(inverse.get(name, name), str(exc)) from exc
    return RunConfig(material=material, **run_kwargs)


_INT_KEYS = {"nelx", "nely", "nelz", "solver_maxiter", "max_outer_iterations"}
_FLOAT_KEYS = {"volfrac", "mu", "tol"}


def _number(key, val, kind=float):
    if isinstance(val, bool):
        raise ConfigError(key, f"expected a number, got {val!r}")
    try:
        out = kind(val)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {val!r}") from None
    if kind is int and out != val and not (isinstance(val, str) and str(out) == val.strip()):
        raise ConfigError(key, f"expected an integer, got {val!r}")
    return out


def _coerce(key, val):
    if key in _INT_KEYS:
        return _number(key, val, int)
    if key in _FLOAT_KEYS:
        return _number(key, val)
    if key == "symmetry":
        if not isinstance(val, bool):
            raise ConfigError(key, f"expected true/false, got {val!r}")
        return val
    return str(val)
