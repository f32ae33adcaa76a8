"""Benchmark load cases: half MBB beam, 2D cantilever, 3D cantilever.

All DOF indices are 0-based. The 1-based index formulas these presets come
from are given in each docstring; subtract one to get the internal index.
"""
from __future__ import annotations

import math

import numpy as np

from .fem import LoadCase
from .mesh import Grid, build_grid

__all__ = ["mbb_half", "cantilever_2d", "cantilever_3d", "PRESETS", "preset_loadcase"]


def _grid2d(dims) -> Grid:
    if isinstance(dims, Grid):
        dims = dims.dims
    if len(dims) != 2:
        raise ValueError(f"2D preset needs (nelx, nely), got {tuple(dims)}")
    return build_grid(dims)


def mbb_half(dims) -> LoadCase:
    """Half MBB beam.

    Unit downward load at the top-left node; horizontal DOFs of the left edge
    fixed (symmetry plane) and the vertical DOF of the bottom-right node fixed
    (roller). In 1-based form: ``F(2) = -1``,
    ``fixeddofs = union(1:2:2*(nely+1), 2*(nelx+1)*(nely+1))``.
    """
    g = _grid2d(dims)
    fixed = np.union1d(np.arange(0, 2 * (g.nely + 1), 2), [g.n_dofs - 1])
    return LoadCase(loads=((1, -1.0),), fixed_dofs=fixed)


def cantilever_2d(dims) -> LoadCase:
    """Cantilever clamped on the left edge, unit downward load at mid-height of the right edge.

    1-based form: ``F(2*((nely+1)*nelx + ceil(nely/2) + 1)) = -1`` and
    ``fixeddofs = 1:2*(nely+1)``.
    """
    g = _grid2d(dims)
    load_dof = 2 * ((g.nely + 1) * g.nelx + (math.ceil(g.nely / 2) + 1)) - 1
    return LoadCase(loads=((load_dof, -1.0),), fixed_dofs=np.arange(2 * (g.nely + 1)))


def cantilever_3d(dims) -> LoadCase:
    """3D cantilever: face x=0 clamped, -1 in y on every node of the right-face bottom edge."""
    if isinstance(dims, Grid):
        dims = dims.dims
    if len(dims) != 3:
        raise ValueError(f"3D preset needs (nelx, nely, nelz), got {tuple(dims)}")
    g = build_grid(dims)
    iz, iy = np.meshgrid(np.arange(g.nelz + 1), np.arange(g.nely + 1), indexing="ij")
    face = g.node_id(0, iy.ravel(), iz.ravel())
    fixed = (3 * face[:, None] + np.arange(3)).ravel()
    edge = g.node_id(g.nelx, g.nely, np.arange(g.nelz + 1))
    loads = tuple((3 * int(n) + 1, -1.0) for n in edge)
    return LoadCase(loads=loads, fixed_dofs=fixed)


PRESETS = {
    "mbb": mbb_half,
    "cantilever2d": cantilever_2d,
    "cantilever3d": cantilever_3d,
}


def preset_loadcase(name: str, dims) -> LoadCase:
    try:
        gen = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PRESETS)}") from None
    return gen(dims)
