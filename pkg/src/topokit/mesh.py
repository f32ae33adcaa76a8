"""Regular voxel grids and element-to-DOF connectivity.

Node and element numbering follow the TOP88/top3d convention:

* nodes are numbered column-major down the y axis, then across x, then
  through z; node ``(ix, iy, iz)`` has id ``iz*(nelx+1)*(nely+1) + ix*(nely+1) + iy``
  where ``iy = 0`` is the *top* row of the domain;
* elements are numbered the same way over ``(ely, elx[, elz])``;
* node ``n`` owns DOFs ``dof_per_node*n + {0, 1[, 2]}`` (x, y[, z]).

Per element the local node order is counter-clockwise in the x-y plane
starting at the bottom-left node (bottom-left, bottom-right, top-right,
top-left), followed in 3D by the same four nodes on the next z layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "build_grid", "element_dofs", "element_dof_map", "local_node_coords"]


@dataclass(frozen=True)
class Grid:
    """A regular grid of unit square/cube elements."""

    dims: tuple[int, ...]
    dof_per_node: int

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def nelx(self) -> int:
        return self.dims[0]

    @property
    def nely(self) -> int:
        return self.dims[1]

    @property
    def nelz(self) -> int:
        return self.dims[2] if self.ndim == 3 else 1

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_nodes(self) -> int:
        return int(np.prod([d + 1 for d in self.dims]))

    @property
    def n_dofs(self) -> int:
        return self.dof_per_node * self.n_nodes

    @property
    def dofs_per_element(self) -> int:
        return self.dof_per_node * 2**self.ndim

    def node_id(self, ix, iy, iz=0):
        """Global node id of grid point ``(ix, iy[, iz])`` (``iy = 0`` is the top)."""
        return iz * (self.nelx + 1) * (self.nely + 1) + ix * (self.nely + 1) + iy

    def element_id(self, elx, ely, elz=0):
        return elz * self.nelx * self.nely + elx * self.nely + ely

    @cached_property
    def edof(self) -> np.ndarray:
        """``(n_elements, dofs_per_element)`` array of global DOF indices."""
        return element_dof_map(self)

    def to_array(self, values) -> np.ndarray:
        """Reshape a per-element vector to image layout.

        2D grids give ``(nely, nelx)``; 3D grids give ``(nelz, nely, nelx)``.
        Row 0 is the top of the physical domain.
        """
        values = np.asarray(values)
        if values.shape != (self.n_elements,):
            raise ValueError(f"expected {self.n_elements} element values, got shape {values.shape}")
        image = values.reshape(self.nelz, self.nelx, self.nely).transpose(0, 2, 1)
        return image[0] if self.ndim == 2 else image

    def from_array(self, image) -> np.ndarray:
        """Inverse of :meth:`to_array`."""
        image = np.asarray(image)
        if self.ndim == 2:
            if image.shape != (self.nely, self.nelx):
                raise ValueError(f"expected image of shape {(self.nely, self.nelx)}, got {image.shape}")
            return image.T.ravel().copy()
        if image.shape != (self.nelz, self.nely, self.nelx):
            raise ValueError(
                f"expected image of shape {(self.nelz, self.nely, self.nelx)}, got {image.shape}"
            )
        return image.transpose(0, 2, 1).ravel().copy()


def build_grid(dims, dof_per_node: int | None = None) -> Grid:
    """Build a 2D (``(nelx, nely)``) or 3D (``(nelx, nely, nelz)``) grid."""
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (2, 3):
        raise ValueError(f"grid must be 2D or 3D, got {len(dims)} dimensions")
    if any(d < 1 for d in dims):
        raise ValueError(f"all grid dimensions must be >= 1, got {dims}")
    if dof_per_node is None:
        dof_per_node = len(dims)
    if dof_per_node != len(dims):
        raise ValueError(f"dof_per_node={dof_per_node} inconsistent with {len(dims)}D grid")
    return Grid(dims, dof_per_node)


def local_node_coords(ndim: int) -> np.ndarray:
    """Unit-element corner coordinates (0/1) in local node order; y points up."""
    quad = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    if ndim == 2:
        return quad
    return np.vstack([np.column_stack([quad, np.zeros(4, int)]), np.column_stack([quad, np.ones(4, int)])])


def element_dof_map(grid: Grid) -> np.ndarray:
    nelx, nely, nelz = grid.nelx, grid.nely, grid.nelz
    elz, elx, ely = np.meshgrid(np.arange(nelz), np.arange(nelx), np.arange(nely), indexing="ij")
    elx, ely, elz = elx.ravel(), ely.ravel(), elz.ravel()

    corners = local_node_coords(grid.ndim)
    nodes = np.empty((grid.n_elements, len(corners)), dtype=np.int64)
    for a, c in enumerate(corners):
        cz = c[2] if grid.ndim == 3 else 0
        # local y=0 is the bottom edge, i.e. row index ely+1
        nodes[:, a] = grid.node_id(elx + c[0], ely + 1 - c[1], elz + cz)

    d = grid.dof_per_node
    return (d * nodes[:, :, None] + np.arange(d)).reshape(grid.n_elements, -1)


def element_dofs(grid: Grid, e: int) -> np.ndarray:
    """Ordered global DOFs of element ``e``."""
    if not 0 <= e < grid.n_elements:
        raise IndexError(f"element index {e} out of range [0, {grid.n_elements})")
    return grid.edof[e].copy()
