"""Monge-Ampere capacity of radial Borel sets.

The capacity of a set is the largest Monge-Ampere mass that a potential
pinned between 0 and 1 can place on it.  On the grid this is a finite
linear program over corridor profiles ``phi_FS <= phi <= phi_FS + 1``;
the bespoke solver below never touches an LP solver: it builds the
relative extremal profile directly, as the psh projection of the
indicator-notched obstacle, and reads off the mass.  A generic LP oracle
(HiGHS via scipy) is kept alongside as the ground-truth cross-check.

Corridor profiles have no pole atoms (the corridor forces slopes 0 and 1
asymptotically), so sets reaching a pole sentinel gain nothing there and
finite sets never count pole mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import (
    DEFAULT_CONFIG,
    Grid,
    ModelConfig,
    RadialPotential,
    ma_measure,
    phi_fs,
)
from .envelopes import project_psh

__all__ = [
    "RadialSet",
    "capacity",
    "capacity_lp_oracle",
    "capacity_extremal",
    "CapDivergence",
    "cap_divergence",
]


@dataclass(frozen=True)
class RadialSet:
    """Finite union of disjoint, sorted s-intervals (endpoints may be +-inf)."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        last = -np.inf
        for a, b in self.intervals:
            if not a <= b:
                raise ValueError(f"interval ({a}, {b}) is reversed")
            if a < last:
                raise ValueError("intervals must be disjoint and sorted")
            last = b

    @staticmethod
    def empty() -> "RadialSet":
        return RadialSet(())

    @staticmethod
    def full_line() -> "RadialSet":
        return RadialSet(((-np.inf, np.inf),))

    @staticmethod
    def from_mask(mask: np.ndarray, grid: Grid) -> "RadialSet":
        """Merge a boolean node mask into grid-aligned intervals."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (grid.N,):
            raise ValueError("mask length does not match grid")
        if not mask.any():
            return RadialSet.empty()
        s = grid.s
        idx = np.flatnonzero(mask)
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [len(idx) - 1]))
        return RadialSet(tuple((float(s[idx[a]]), float(s[idx[b]]))
                               for a, b in zip(starts, ends)))

    def is_empty(self) -> bool:
        return len(self.intervals) == 0

    def node_mask(self, grid: Grid) -> np.ndarray:
        s = grid.s
        mask = np.zeros(grid.N, dtype=bool)
        for a, b in self.intervals:
            mask |= (s >= a - 1e-12) & (s <= b + 1e-12)
        return mask

    def touches_pole(self) -> tuple[bool, bool]:
        neg = any(np.isneginf(a) for a, _ in self.intervals)
        pos = any(np.isposinf(b) for _, b in self.intervals)
        return neg, pos


def capacity_extremal(B: RadialSet, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Relative extremal profile of the set, shifted into the corridor.

    The largest admissible profile below ``phi_FS + 1`` off the set and
    ``phi_FS`` on it; its curvature concentrates on the set as hard as
    the corridor allows.
    """
    grid = cfg.grid
    base = phi_fs(grid.s)
    b = base + 1.0
    mask = B.node_mask(grid)
    b[mask] = base[mask]
    return project_psh(b, 0.0, 1.0, cfg)


def capacity(B: RadialSet, cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Monge-Ampere capacity of the set via the extremal profile."""
    if B.is_empty():
        return 0.0
    v = capacity_extremal(B, cfg)
    mu = ma_measure(v)
    return mu.mass_on_mask(B.node_mask(cfg.grid))


def capacity_lp_oracle(B: RadialSet, cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Generic LP solution of the same extremal problem (slow reference).

    Decision variables are the profile samples; the objective collects
    the discrete curvature masses sitting on the set, the constraints are
    the corridor, convexity, and the slope window [0, 1].  Intended for
    coarse grids; the bespoke solver is checked against it there.
    """
    if B.is_empty():
        return 0.0
    grid = cfg.grid
    n, ds = grid.N, grid.ds
    base = phi_fs(grid.s)
    mask = B.node_mask(grid)

    # node masses as linear forms in phi: mu_0 = (phi_1 - phi_0)/ds,
    # mu_i = (phi_{i+1} - 2 phi_i + phi_{i-1})/ds,
    # mu_{n-1} = 1 - (phi_{n-1} - phi_{n-2})/ds
    c = np.zeros(n)
    const = 0.0
    for i in np.flatnonzero(mask):
        if i == 0:
            c[1] += 1.0 / ds
            c[0] -= 1.0 / ds
        elif i == n - 1:
            const += 1.0
            c[n - 1] -= 1.0 / ds
            c[n - 2] += 1.0 / ds
        else:
            c[i + 1] += 1.0 / ds
            c[i] -= 2.0 / ds
            c[i - 1] += 1.0 / ds

    rows, cols, data, b_ub = [], [], [], []
    row = 0
    for i in range(1, n - 1):  # convexity: -phi_{i-1} + 2 phi_i - phi_{i+1} <= 0
        rows += [row, row, row]
        cols += [i - 1, i, i + 1]
        data += [-1.0, 2.0, -1.0]
        b_ub.append(0.0)
        row += 1
    rows += [row, row]          # first slope >= 0
    cols += [0, 1]
    data += [1.0, -1.0]
    b_ub.append(0.0)
    row += 1
    rows += [row, row]          # last slope <= 1
    cols += [n - 1, n - 2]
    data += [1.0, -1.0]
    b_ub.append(ds)
    row += 1

    from scipy.sparse import coo_matrix
    A_ub = coo_matrix((data, (rows, cols)), shape=(row, n))
    bounds = list(zip(base, base + 1.0))
    res = linprog(-c, A_ub=A_ub, b_ub=np.asarray(b_ub), bounds=bounds,
                  method="highs")
    if not res.success:
        raise RuntimeError(f"capacity LP failed: {res.message}")
    return float(-res.fun + const)


@dataclass(frozen=True)
class CapDivergence:
    """Capacities of the deviation sets {|u_k - u| > eps}, in sequence order."""

    values: np.ndarray
    unresolved: bool
    resolution: float


def cap_divergence(u_seq, u: RadialPotential, eps: float,
                   cfg: ModelConfig = DEFAULT_CONFIG) -> CapDivergence:
    """Capacity distance of each sequence member from the limit.

    The deviation sets are computed node-wise and merged into intervals.
    When eps sits below the per-cell variation of the deviations, the
    sets are not grid-resolvable and the result says so instead of
    silently reporting noise.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grid = cfg.grid
    caps = []
    resolution = 0.0
    for uk in u_seq:
        diff = np.abs(uk.phi - u.phi)
        if len(diff) > 1:
            resolution = max(resolution, float(np.max(np.abs(np.diff(diff)))))
        mask = diff > eps
        if not mask.any():
            caps.append(0.0)
        else:
            caps.append(capacity(RadialSet.from_mask(mask, grid), cfg))
    return CapDivergence(np.asarray(caps), unresolved=eps < resolution,
                         resolution=resolution)
