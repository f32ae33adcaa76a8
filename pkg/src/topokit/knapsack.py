"""Upper-level knapsack for equally sized elements.

With unit weights the 0-1 knapsack is solved exactly by taking the ``k``
largest values. Designs are ``int8`` arrays of zeros and ones.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = ["select_top_k", "volume_budget", "target_count", "budget_schedule", "solid_count"]


def select_top_k(values, k: int) -> np.ndarray:
    """Design with ones at the ``k`` largest ``values``.

    Ties go to the lower element index.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range [0, {n}]")
    # stable sort of -values == descending order, lowest index first among ties
    order = np.argsort(-values, kind="stable")
    design = np.zeros(n, dtype=np.int8)
    design[order[:k]] = 1
    return design


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def volume_budget(n_elements: int, volfrac: float, mu: float, k: int) -> int:
    """Solid-element budget at iteration ``k``: ``round(n * max(volfrac, mu**k))``."""
    if n_elements < 1:
        raise ValueError(f"n_elements must be >= 1, got {n_elements}")
    if not 0 < volfrac <= 1:
        raise ValueError(f"volfrac must satisfy 0 < volfrac <= 1, got {volfrac}")
    if not 0 < mu < 1:
        raise ValueError(f"mu must satisfy 0 < mu < 1, got {mu}")
    if k < 1:
        raise ValueError(f"iteration index must be >= 1, got {k}")
    return _round_half_away(n_elements * max(volfrac, mu**k))


def target_count(n_elements: int, volfrac: float) -> int:
    """Final solid-element count ``round(n * volfrac)``."""
    return _round_half_away(n_elements * volfrac)


def budget_schedule(n_elements: int, volfrac: float, mu: float) -> list[int]:
    """Budgets for iterations 1, 2, ... up to the first one at target."""
    target = target_count(n_elements, volfrac)
    out = []
    k = 1
    while True:
        b = volume_budget(n_elements, volfrac, mu, k)
        out.append(b)
        if b == target:
            return out
        k += 1


def solid_count(design) -> int:
    return int(np.count_nonzero(design))
