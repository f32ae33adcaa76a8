"""Element strain energies used as knapsack values, and the compliance objective."""
from __future__ import annotations

import numpy as np

from .fem import MaterialModel, element_scale, element_stiffness
from .mesh import Grid

__all__ = ["element_energies", "objective"]


def element_energies(grid: Grid, design, material: MaterialModel, u, KE=None) -> np.ndarray:
    """Per-element value ``(Emin + rho_e (E0 - Emin)) * u_e . KE . u_e``.

    Void elements keep an ``Emin``-weighted value, so a void element under
    large deformation can win its way back into the design.
    """
    design = np.asarray(design)
    u = np.asarray(u, dtype=float)
    if design.shape != (grid.n_elements,):
        raise ValueError(f"design has {design.size} entries, grid has {grid.n_elements} elements")
    if u.shape != (grid.n_dofs,):
        raise ValueError(f"displacement has {u.size} entries, grid has {grid.n_dofs} DOFs")
    if KE is None:
        KE = element_stiffness(grid.ndim, material.nu)
    ue = u[grid.edof]
    energy = np.einsum("ei,ij,ej->e", ue, KE, ue)
    return element_scale(design, material) * energy


def objective(f, u) -> float:
    """Compliance ``f . u``."""
    f = np.asarray(f, dtype=float)
    u = np.asarray(u, dtype=float)
    if f.shape != u.shape:
        raise ValueError(f"load and displacement lengths differ: {f.shape} vs {u.shape}")
    return float(f @ u)
