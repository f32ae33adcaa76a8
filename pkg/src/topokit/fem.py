"""Linear elastic finite elements on regular grids.

Element matrices are for unit Young's modulus on a unit square (plane stress)
or unit cube. Void elements keep an ersatz stiffness ``Emin`` so the global
matrix stays nonsingular; element ``e`` is scaled by
``Emin + rho_e * (E0 - Emin)``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Grid, local_node_coords

__all__ = [
    "MaterialModel",
    "LoadCase",
    "SparseSystem",
    "SolveInfo",
    "Assembler",
    "SolverError",
    "StructuralError",
    "element_stiffness",
    "element_stiffness_2d",
    "element_stiffness_3d",
    "element_scale",
    "assemble",
    "solve_displacements",
    "DENSE_MAX_DOFS",
]

log = logging.getLogger(__name__)

DENSE_MAX_DOFS = 3000


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StructuralError(RuntimeError):
    """Stiffness matrix is singular or indefinite, usually a bad set of supports."""


@dataclass(frozen=True)
class MaterialModel:
    E0: float = 1.0
    Emin: float = 1e-9
    nu: float = 0.3
    p: float = 2.0

    def __post_init__(self):
        if not self.E0 > 0:
            raise ValueError(f"E0 must be positive, got {self.E0}")
        if not 0 < self.Emin < self.E0:
            raise ValueError(f"Emin must satisfy 0 < Emin < E0, got {self.Emin}")
        if not 0 <= self.nu < 0.5:
            raise ValueError(f"nu must satisfy 0 <= nu < 0.5, got {self.nu}")
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")


@dataclass(frozen=True)
class LoadCase:
    """Point loads and supports, both in 0-based global DOF indices."""

    loads: tuple[tuple[int, float], ...]
    fixed_dofs: np.ndarray = field(repr=False)

    def __post_init__(self):
        fixed = np.unique(np.asarray(self.fixed_dofs, dtype=np.int64))
        object.__setattr__(self, "fixed_dofs", fixed)
        object.__setattr__(self, "loads", tuple((int(d), float(v)) for d, v in self.loads))
        if fixed.size == 0:
            raise ValueError("load case needs at least one fixed DOF")

    def validate(self, n_dofs: int) -> None:
        if self.fixed_dofs.min() < 0 or self.fixed_dofs.max() >= n_dofs:
            raise ValueError(f"fixed DOF out of range [0, {n_dofs})")
        for dof, _ in self.loads:
            if not 0 <= dof < n_dofs:
                raise ValueError(f"loaded DOF {dof} out of range [0, {n_dofs})")

    def force_vector(self, n_dofs: int) -> np.ndarray:
        self.validate(n_dofs)
        f = np.zeros(n_dofs)
        for dof, value in self.loads:
            f[dof] += value
        return f

    def free_dofs(self, n_dofs: int) -> np.ndarray:
        return np.setdiff1d(np.arange(n_dofs), self.fixed_dofs)


# --- element matrices -------------------------------------------------------

def _check_nu(nu):
    if not 0 <= nu < 0.5:
        raise ValueError(f"Poisson ratio must satisfy 0 <= nu < 0.5, got {nu}")


def element_stiffness_2d(nu: float = 0.3) -> np.ndarray:
    """Q4 plane-stress stiffness for a unit square with E = 1 (TOP88 closed form)."""
    _check_nu(nu)
    k = np.array([
        1 / 2 - nu / 6, 1 / 8 + nu / 8, -1 / 4 - nu / 12, -1 / 8 + 3 * nu / 8,
        -1 / 4 + nu / 12, -1 / 8 - nu / 8, nu / 6, 1 / 8 - 3 * nu / 8,
    ])
    idx = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    return k[idx] / (1 - nu**2)


def _elasticity_tensor(ndim, nu):
    if ndim == 2:
        # plane stress, E = 1
        lam = nu / (1 - nu**2)
    else:
        lam = nu / ((1 + nu) * (1 - 2 * nu))
    mu = 1 / (2 * (1 + nu))
    d = np.eye(ndim)
    return (lam * np.einsum("ij,kl->ijkl", d, d)
            + mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d)))


def _exact_gradient_products(ndim):
    """G[a, b, k, l] = integral over the unit element of dN_a/dx_k * dN_b/dx_l.

    Trilinear shape functions are products of 1D hat functions, so each
    integral factors into 1D integrals that are known exactly.
    """
    coords = local_node_coords(ndim)
    # 1D integrals on [0, 1] of phi_0 = 1 - t, phi_1 = t and their derivatives
    mass = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    stiff = np.array([[1.0, -1.0], [-1.0, 1.0]])
    mixed = np.array([[-0.5, -0.5], [0.5, 0.5]])  # integral of phi_a' * phi_b

    n = len(coords)
    G = np.ones((n, n, ndim, ndim))
    for a in range(n):
        for b in range(n):
            for k in range(ndim):
                for l in range(ndim):
                    val = 1.0
                    for j in range(ndim):
                        ca, cb = coords[a, j], coords[b, j]
                        if j == k and j == l:
                            val *= stiff[ca, cb]
                        elif j == k:
                            val *= mixed[ca, cb]
                        elif j == l:
                            val *= mixed[cb, ca]
                        else:
                            val *= mass[ca, cb]
                    G[a, b, k, l] = val
    return G


@lru_cache(maxsize=None)
def _cached_stiffness(ndim, nu):
    C = _elasticity_tensor(ndim, nu)
    G = _exact_gradient_products(ndim)
    # K[(a,i),(b,j)] = sum_kl G[a,b,k,l] * C[i,k,j,l]
    K = np.einsum("abkl,ikjl->aibj", G, C)
    n = K.shape[0] * ndim
    K = K.reshape(n, n)
    K = 0.5 * (K + K.T)
    K.setflags(write=False)
    return K


def element_stiffness_3d(nu: float = 0.3) -> np.ndarray:
    """H8 stiffness for a unit cube with E = 1, integrated exactly."""
    _check_nu(nu)
    return _cached_stiffness(3, float(nu)).copy()


def element_stiffness(ndim: int, nu: float) -> np.ndarray:
    if ndim == 2:
        return element_stiffness_2d(nu)
    if ndim == 3:
        return element_stiffness_3d(nu)
    raise ValueError(f"unsupported dimension {ndim}")


def element_scale(design, material: MaterialModel) -> np.ndarray:
    """Per-element modulus ``Emin + rho_e * (E0 - Emin)``."""
    return material.Emin + np.asarray(design, dtype=float) * (material.E0 - material.Emin)


# --- assembly ---------------------------------------------------------------

@dataclass
class SparseSystem:
    """Stiffness and load restricted to the free DOFs."""

    K: sp.csr_matrix
    f: np.ndarray
    free_dofs: np.ndarray
    fixed_dofs: np.ndarray
    n_dofs: int

    def expand(self, u_free) -> np.ndarray:
        u = np.zeros(self.n_dofs)
        u[self.free_dofs] = u_free
        return u


class Assembler:
    """Assembles reduced stiffness matrices for one grid and load case.

    Index bookkeeping is done once; each call only recomputes the values.
    """

    def __init__(self, grid: Grid, loadcase: LoadCase, material: MaterialModel):
        self.grid = grid
        self.loadcase = loadcase
        self.material = material
        self.KE = element_stiffness(grid.ndim, material.nu)

        n = grid.n_dofs
        self.f_full = loadcase.force_vector(n)
        self.free = loadcase.free_dofs(n)
        self.fixed = loadcase.fixed_dofs
        reduced = np.full(n, -1, dtype=np.int64)
        reduced[self.free] = np.arange(self.free.size)

        edof = grid.edof
        m = edof.shape[1]
        rows = np.repeat(reduced[edof], m, axis=1)
        cols = np.tile(reduced[edof], (1, m))
        keep = (rows >= 0) & (cols >= 0)
        self._keep = keep
        self._rows = rows[keep]
        self._cols = cols[keep]
        self._ke_flat = self.KE.ravel()

    def assemble(self, design) -> SparseSystem:
        design = np.asarray(design)
        if design.shape != (self.grid.n_elements,):
            raise ValueError(
                f"design has {design.size} entries, grid has {self.grid.n_elements} elements"
            )
        scale = element_scale(design, self.material)
        vals = (scale[:, None] * self._ke_flat[None, :])[self._keep]
        nf = self.free.size
        K = sp.coo_matrix((vals, (self._rows, self._cols)), shape=(nf, nf)).tocsr()
        K.sum_duplicates()
        return SparseSystem(K, self.f_full[self.free], self.free, self.fixed, self.grid.n_dofs)


def assemble(grid: Grid, design, material: MaterialModel, loadcase: LoadCase) -> SparseSystem:
    return Assembler(grid, loadcase, material).assemble(design)


# --- solvers ----------------------------------------------------------------

@dataclass
class SolveInfo:
    iterations: int
    residual: float
    method: str


def _pcg(K, f, x0, tol, maxiter):
    """Jacobi-preconditioned conjugate gradients."""
    diag = K.diagonal()
    if np.any(diag <= 0):
        raise StructuralError("stiffness matrix has a non-positive diagonal entry")
    minv = 1.0 / diag
    fnorm = np.linalg.norm(f)
    x = np.zeros_like(f) if x0 is None else np.array(x0, dtype=float)
    r = f - K @ x
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * fnorm:
        return x, 0, rnorm / fnorm
    z = minv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Kp = K @ p
        pKp = p @ Kp
        if pKp <= 0:
            raise StructuralError(
                f"stiffness matrix is not positive definite (p.Kp = {pKp:.3e} at iteration {it}); "
                "check the supports"
            )
        alpha = rz / pKp
        x += alpha * p
        r -= alpha * Kp
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * fnorm:
            return x, it, rnorm / fnorm
        z = minv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(
        f"CG did not converge in {maxiter} iterations (relative residual {rnorm / fnorm:.3e})",
        residual=rnorm / fnorm,
        iterations=maxiter,
    )


def _dense(K, f):
    A = K.toarray()
    try:
        c = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise StructuralError("stiffness matrix is not positive definite; check the supports") from exc
    return scipy.linalg.cho_solve(c, f)


def solve_displacements(
    system: SparseSystem,
    method: str = "cg",
    tol: float = 1e-8,
    maxiter: int | None = None,
    x0=None,
) -> tuple[np.ndarray, SolveInfo]:
    """Solve ``K u = f`` on the free DOFs and return the full-length ``u``.

    ``method`` is ``"cg"`` (Jacobi PCG, optional warm start ``x0`` on the free
    DOFs), ``"dense"`` (Cholesky, at most ``DENSE_MAX_DOFS`` DOFs) or
    ``"direct"`` (sparse LU).
    """
    K, f = system.K, system.f
    fnorm = np.linalg.norm(f)
    if fnorm == 0:
        return np.zeros(system.n_dofs), SolveInfo(0, 0.0, method)

    if method == "cg":
        if maxiter is None:
            maxiter = 10 * system.n_dofs
        u, iters, _ = _pcg(K, f, x0, tol, maxiter)
    elif method == "dense":
        if system.n_dofs > DENSE_MAX_DOFS:
            raise ValueError(f"dense solver limited to {DENSE_MAX_DOFS} DOFs, system has {system.n_dofs}")
        u, iters = _dense(K, f), 0
    elif method == "direct":
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                u, iters = spla.spsolve(K.tocsc(), f), 0
            except spla.MatrixRankWarning as exc:
                raise StructuralError("stiffness matrix is singular; check the supports") from exc
        if not np.all(np.isfinite(u)):
            raise StructuralError("sparse factorization failed; check the supports")
    else:
        raise ValueError(f"unknown solver {method!r}")

    # direct paths detect singularity through the factorization itself; with
    # void islands their residual is limited by conditioning, not by tol
    residual = float(np.linalg.norm(K @ u - f) / fnorm)
    return system.expand(u), SolveInfo(iters, residual, method)
