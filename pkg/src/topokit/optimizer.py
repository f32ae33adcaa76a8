"""Bilevel knapsack topology optimization loop.

Each outer iteration ``k``:

1. shrink the volume budget (``volume_budget``),
2. solve equilibrium for the previous design,
3. compute element strain energies,
4. re-select the ``budget`` most energetic elements (knapsack),

and stop once the budget is at target and the design no longer changes.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .fem import Assembler, LoadCase, MaterialModel, SolverError, solve_displacements
from .knapsack import select_top_k, target_count, volume_budget
from .mesh import Grid, build_grid
from .problems import PRESETS, preset_loadcase
from .sensitivity import element_energies, objective

__all__ = [
    "ConfigError",
    "RunConfig",
    "IterationRecord",
    "RunResult",
    "run",
    "apply_symmetry",
    "checkerboard_score",
    "CYCLE_PATIENCE",
]

log = logging.getLogger(__name__)

CYCLE_PATIENCE = 10
SOLVERS = ("cg", "dense", "direct")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    problem: str = "mbb"
    nelx: int = 60
    nely: int = 20
    nelz: Optional[int] = None
    volfrac: float = 0.5
    mu: float = 0.97
    material: MaterialModel = field(default_factory=MaterialModel)
    solver: str = "cg"
    tol: float = 1e-8
    solver_maxiter: Optional[int] = None
    max_outer_iterations: int = 1000
    symmetry: bool = False
    loadcase: Optional[LoadCase] = None

    def __post_init__(self):
        if self.loadcase is None and self.problem not in PRESETS:
            raise ConfigError("problem", f"unknown problem {self.problem!r}; choose from {sorted(PRESETS)}")
        for name in ("nelx", "nely"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if self.nelz is not None and self.nelz < 1:
            raise ConfigError("nelz", f"must be >= 1, got {self.nelz}")
        if self.problem == "cantilever3d" and self.nelz is None:
            raise ConfigError("nelz", "required for cantilever3d")
        if self.problem in ("mbb", "cantilever2d") and self.nelz is not None and self.loadcase is None:
            raise ConfigError("nelz", f"problem {self.problem!r} is 2D")
        if not 0 < self.volfrac <= 1:
            raise ConfigError("volfrac", f"must satisfy 0 < volfrac <= 1, got {self.volfrac}")
        if not 0 < self.mu < 1:
            raise ConfigError("mu", f"must satisfy 0 < mu < 1, got {self.mu}")
        if self.solver not in SOLVERS:
            raise ConfigError("solver", f"must be one of {SOLVERS}, got {self.solver!r}")
        if not self.tol > 0:
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        if self.solver_maxiter is not None and self.solver_maxiter < 1:
            raise ConfigError("solver_maxiter", f"must be >= 1, got {self.solver_maxiter}")
        if self.max_outer_iterations < 1:
            raise ConfigError("max_outer_iterations", f"must be >= 1, got {self.max_outer_iterations}")

    @property
    def dims(self) -> tuple[int, ...]:
        if self.nelz is None:
            return (self.nelx, self.nely)
        return (self.nelx, self.nely, self.nelz)

    def with_updates(self, **changes) -> "RunConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    budget: int
    vol_frac: float
    compliance: float  # of the design the solve was run on, i.e. the previous one
    changed: int
    solver_iters: int
    residual: float
    wall_ms: float
    design: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class RunResult:
    design: np.ndarray
    history: tuple[IterationRecord, ...]
    reason: str  # converged | converged-cycle | max-iterations | solver-failure
    compliance: float
    grid: Grid
    config: RunConfig
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.reason in ("converged", "converged-cycle")

    @property
    def n_iterations(self) -> int:
        return len(self.history)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.int8, copy=True)
    a.setflags(write=False)
    return a


def run(config: RunConfig, on_iteration: Callable[[IterationRecord], None] | None = None) -> RunResult:
    """Run the optimization described by ``config``."""
    grid = build_grid(config.dims)
    loadcase = config.loadcase if config.loadcase is not None else preset_loadcase(config.problem, config.dims)
    loadcase.validate(grid.n_dofs)
    material = config.material
    asm = Assembler(grid, loadcase, material)
    KE = asm.KE
    n = grid.n_elements
    target = target_count(n, config.volfrac)
    # d Pi / d rho_e = p/2 * rho_e^(p-1) * u_e K_e u_e; for 0/1 designs p only rescales
    value_factor = 0.5 * material.p

    def solve(design, x0=None):
        system = asm.assemble(design)
        u, info = solve_displacements(
            system, method=config.solver, tol=config.tol, maxiter=config.solver_maxiter, x0=x0
        )
        return u, info

    design = np.ones(n, dtype=np.int8)
    before = None  # design two iterations back
    warm = None
    values = None
    history: list[IterationRecord] = []
    cycle_hits = 0
    reason = "max-iterations"
    final_design = None
    final_compliance = None

    for k in range(1, config.max_outer_iterations + 1):
        t0 = time.perf_counter()
        budget = volume_budget(n, config.volfrac, config.mu, k)
        try:
            u, info = solve(design, warm)
        except SolverError as exc:
            msg = f"iteration {k}: {exc}"
            log.error(msg)
            return RunResult(_frozen(design), tuple(history), "solver-failure", float("nan"),
                             grid, config, error=msg)
        if config.solver == "cg":
            warm = u[asm.free]
        compliance = objective(asm.f_full, u)
        values = value_factor * element_energies(grid, design, material, u, KE)
        new = select_top_k(values, budget)
        changed = int(np.count_nonzero(new != design))

        rec = IterationRecord(
            iteration=k,
            budget=budget,
            vol_frac=budget / n,
            compliance=compliance,
            changed=changed,
            solver_iters=info.iterations,
            residual=info.residual,
            wall_ms=1e3 * (time.perf_counter() - t0),
            design=_frozen(new),
        )
        history.append(rec)
        if on_iteration is not None:
            on_iteration(rec)

        if budget == target and k >= 2 and changed == 0:
            reason = "converged"
            final_design, final_compliance = new, compliance
            break

        if budget == target and before is not None and changed > 0 and np.array_equal(new, before):
            cycle_hits += 1
        else:
            cycle_hits = 0
        if cycle_hits >= CYCLE_PATIENCE:
            reason = "converged-cycle"
            # `design` was analysed this iteration, `new` (== before) last iteration
            if compliance <= history[-2].compliance:
                final_design, final_compliance = design, compliance
            else:
                final_design, final_compliance = new, history[-2].compliance
            break

        before, design = design, new

    if final_design is None:
        final_design = design
        u, _ = solve(final_design, warm)
        final_compliance = objective(asm.f_full, u)

    if config.symmetry:
        final_design = apply_symmetry(final_design, grid, axis="y", values=values)
        u, _ = solve(final_design, warm)
        final_compliance = objective(asm.f_full, u)

    return RunResult(_frozen(final_design), tuple(history), reason, float(final_compliance), grid, config)


_AXES = {2: {"y": 0, "x": 1}, 3: {"z": 0, "y": 1, "x": 2}}


def apply_symmetry(design, grid: Grid, axis: str = "y", values=None, keep: str | None = None) -> np.ndarray:
    """Mirror one half of the design onto the other about the mid-plane of ``axis``.

    ``keep`` selects the half that survives: ``"low"`` (lower indices, i.e. top
    for ``y``, left for ``x``) or ``"high"``. By default the half with the
    larger summed ``values`` is kept; ties, or no ``values``, keep ``"high"``
    (the bottom half for ``y``). A middle row, if any, is left as is.
    """
    try:
        ax = _AXES[grid.ndim][axis]
    except KeyError:
        raise ValueError(f"axis {axis!r} not valid for a {grid.ndim}D grid") from None
    img = grid.to_array(np.asarray(design, dtype=np.int8)).copy()
    size = img.shape[ax]
    h = size // 2
    lo = [slice(None)] * img.ndim
    hi = [slice(None)] * img.ndim
    lo[ax] = slice(0, h)
    hi[ax] = slice(size - h, size)
    lo, hi = tuple(lo), tuple(hi)

    if keep is None:
        keep = "high"
        if values is not None:
            vimg = grid.to_array(np.asarray(values, dtype=float))
            if vimg[lo].sum() > vimg[hi].sum():
                keep = "low"
    if keep == "low":
        img[hi] = np.flip(img[lo], axis=ax)
    elif keep == "high":
        img[lo] = np.flip(img[hi], axis=ax)
    else:
        raise ValueError(f"keep must be 'low', 'high' or None, got {keep!r}")
    return grid.from_array(img).astype(np.int8)


def checkerboard_score(design, grid: Grid) -> int:
    """Number of 2x2 element windows in an exact diagonal (checkerboard) pattern."""
    if grid.ndim != 2:
        raise NotImplementedError("checkerboard score is only defined for 2D grids")
    img = grid.to_array(np.asarray(design))
    a, b = img[:-1, :-1], img[:-1, 1:]
    c, d = img[1:, :-1], img[1:, 1:]
    return int(np.count_nonzero((a == d) & (b == c) & (a != b)))
