"""Radial potentials on the Riemann sphere and their convex duals.

A circle-invariant metric potential on the sphere is encoded by a convex
profile ``phi(s)`` on the real line with slopes in ``[0, 1]``, sampled on a
uniform grid ``s in [-S, S]`` and extended by linear tails beyond the grid.
The reference round-metric profile is ``phi_FS(s) = log(1 + e^s)``; the
relative potential ``u = phi - phi_FS`` is the object the rest of the
library reasons about.

The Legendre transform moves a profile to the momentum interval ``[0, 1]``,
where the dual potential ``psi`` is convex and possibly ``+inf`` outside a
contiguous effective domain.  Almost every construction downstream (rooftop
envelopes, weak geodesics, the path-length metric) is pointwise or linear on
the dual grid, which is why this module keeps the two representations glued
together: a potential built from a dual remembers it, and ``dual_of``
returns the remembered transform when the grids match.

All objects are immutable after construction; every function here is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import expit, xlogy

__all__ = [
    "ModelConfig",
    "DEFAULT_CONFIG",
    "Grid",
    "PowerTail",
    "RadialPotential",
    "DualPotential",
    "MAMeasure",
    "InvariantViolation",
    "ConsistencyError",
    "ClassError",
    "phi_fs",
    "phi_fs_prime",
    "phi_fs_second",
    "psi_fs",
    "make_potential",
    "make_dual",
    "dual_of",
    "primal_of",
    "ma_measure",
    "cutoff",
    "lower_convex_hull",
    "conjugate_argmax",
    "shift",
    "scale_relative",
    "pointwise_max",
    "pointwise_min_obstacle",
    "potential_to_dict",
    "potential_from_dict",
    "dual_to_dict",
    "dual_from_dict",
]


class InvariantViolation(ValueError):
    """A domain object fails its invariants beyond the repair tolerance."""


class ConsistencyError(RuntimeError):
    """Two supposedly-agreeing computation routes disagree."""


class ClassError(ValueError):
    """An operation was applied outside the potential class it is defined on."""


# ---------------------------------------------------------------------------
# Reference profile
# ---------------------------------------------------------------------------

def phi_fs(s):
    """Round-metric profile log(1 + e^s), evaluated stably."""
    return np.logaddexp(0.0, s)


def phi_fs_prime(s):
    """Momentum map of the round metric, e^s / (1 + e^s)."""
    return expit(s)


def phi_fs_second(s):
    """Density of the round-metric area measure on the s-line."""
    p = expit(s)
    return p * (1.0 - p)


def psi_fs(x):
    """Dual of the round profile: x log x + (1-x) log(1-x), with 0 log 0 = 0."""
    x = np.asarray(x, dtype=float)
    return xlogy(x, x) + xlogy(1.0 - x, 1.0 - x)


# ---------------------------------------------------------------------------
# Configuration and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    """Grid sizes and tolerances shared by the whole laboratory.

    Defaults put the grid edge at S = 30 where the round measure has tail
    weight below 1e-13, invisible to every tolerance used in the tests.
    """

    primal_half_width: float = 30.0
    primal_points: int = 2048
    dual_points: int = 1024
    convexity_tol: float = 1e-8
    quadrature: str = "trapezoid"

    def __post_init__(self):
        if not self.primal_half_width > 0:
            raise InvariantViolation("primal_half_width must be positive")
        if self.primal_points < 16 or self.dual_points < 16:
            raise InvariantViolation("need at least 16 grid points per axis")
        if not self.convexity_tol > 0:
            raise InvariantViolation("convexity_tol must be positive")
        if self.quadrature != "trapezoid":
            raise InvariantViolation(f"unknown quadrature {self.quadrature!r}")

    @property
    def grid(self) -> "Grid":
        return Grid(self.primal_half_width, self.primal_points)

    def dual_xs(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.dual_points + 1)


DEFAULT_CONFIG = ModelConfig()


@dataclass(frozen=True)
class Grid:
    """Uniform primal grid s_i = -S + i * ds, i = 0..N-1."""

    S: float
    N: int

    @property
    def ds(self) -> float:
        return 2.0 * self.S / (self.N - 1)

    @cached_property
    def s(self) -> np.ndarray:
        s = np.linspace(-self.S, self.S, self.N)
        s.flags.writeable = False
        return s


def _frozen(a) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=float)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerTail:
    """Analytic continuation of a potential beyond the left grid edge.

    Declares that the relative potential behaves like
    ``u(s) = coeff * (1 - (1 + s^2)^(alpha/2))`` for ``s`` below the grid,
    i.e. decays to -inf like ``-coeff * |s|^alpha``.  The grid object itself
    stays bounded; energy computations consult this record to see the true
    unbounded profile (the asymptotic slope is 0, so no pole atom appears).
    """

    alpha: float
    coeff: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InvariantViolation("power tail exponent must lie in (0, 1)")
        if not self.coeff > 0:
            raise InvariantViolation("power tail coefficient must be positive")

    def u(self, s):
        s = np.asarray(s, dtype=float)
        return self.coeff * (1.0 - (1.0 + s * s) ** (self.alpha / 2.0))

    def u_prime(self, s):
        s = np.asarray(s, dtype=float)
        return -self.coeff * self.alpha * s * (1.0 + s * s) ** (self.alpha / 2.0 - 1.0)

    def depth_at(self, s):
        return -self.u(s)

    def s_where_depth(self, h: float) -> float:
        """Leftward position where the tail reaches depth h (u = -h)."""
        r = (1.0 + h / self.coeff) ** (2.0 / self.alpha) - 1.0
        return -float(np.sqrt(max(r, 0.0)))


@dataclass(frozen=True)
class RadialPotential:
    """Slope-constrained convex profile standing in for an invariant potential.

    ``phi`` samples the profile on ``grid``; beyond the grid the profile
    continues linearly with slopes ``slope_left`` / ``slope_right``.  The
    declared tail slopes are part of the mathematical object: they are the
    Lelong data at the two poles and may be strictly inside the range of
    the discrete slopes (curvature beyond the grid edge).
    """

    grid: Grid
    phi: np.ndarray
    slope_left: float
    slope_right: float
    left_tail: PowerTail | None = None
    dual_cache: "DualPotential | None" = field(
        default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen(self.phi))
        if self.phi.shape != (self.grid.N,):
            raise InvariantViolation("phi sample count does not match grid")
        if not np.all(np.isfinite(self.phi)):
            raise InvariantViolation("phi samples must be finite")
        if not (-1e-12 <= self.slope_left <= self.slope_right <= 1.0 + 1e-12):
            raise InvariantViolation(
                "tail slopes must satisfy 0 <= slope_left <= slope_right <= 1")

    @cached_property
    def u(self) -> np.ndarray:
        """Relative potential u = phi - phi_FS on the grid."""
        return _frozen(self.phi - phi_fs(self.grid.s))

    def slopes(self) -> np.ndarray:
        return np.diff(self.phi) / self.grid.ds

    def value_scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.phi)))

    def is_full_mass(self, tol: float = 1e-9) -> bool:
        return self.slope_left <= tol and self.slope_right >= 1.0 - tol


@dataclass(frozen=True)
class DualPotential:
    """Convex dual samples on x_j = j/M, finite on a contiguous window."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        v = self.values
        if v.ndim != 1 or v.shape[0] < 17:
            raise InvariantViolation("dual potential needs at least 17 samples")
        finite = np.isfinite(v)
        if not finite.any():
            raise InvariantViolation("dual potential is identically +inf")
        ja, jb = np.argmax(finite), len(v) - 1 - np.argmax(finite[::-1])
        if not finite[ja:jb + 1].all():
            raise InvariantViolation("+inf entries must form a prefix and a suffix")
        if np.isneginf(v).any() or np.isnan(v).any():
            raise InvariantViolation("dual values must be finite or +inf")

    @property
    def M(self) -> int:
        return len(self.values) - 1

    @cached_property
    def xs(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, 1.0, len(self.values)))

    @cached_property
    def window(self) -> tuple[int, int]:
        """Indices (ja, jb) of the effective domain."""
        finite = np.isfinite(self.values)
        ja = int(np.argmax(finite))
        jb = int(len(self.values) - 1 - np.argmax(finite[::-1]))
        return ja, jb

    def is_full_domain(self) -> bool:
        ja, jb = self.window
        return ja == 0 and jb == self.M

    def finite_values(self) -> np.ndarray:
        ja, jb = self.window
        return self.values[ja:jb + 1]


@dataclass(frozen=True)
class MAMeasure:
    """Monge-Ampere measure: node masses on the grid plus two pole atoms."""

    grid: Grid
    node_masses: np.ndarray
    atom_neg: float
    atom_pos: float

    def __post_init__(self):
        object.__setattr__(self, "node_masses", _frozen(self.node_masses))

    @property
    def total_mass(self) -> float:
        return float(self.node_masses.sum() + self.atom_neg + self.atom_pos)

    @property
    def nonpluripolar_mass(self) -> float:
        return float(self.node_masses.sum())

    def mass_on_mask(self, mask: np.ndarray) -> float:
        return float(self.node_masses[mask].sum())


# ---------------------------------------------------------------------------
# Construction with validation and repair
# ---------------------------------------------------------------------------

def _hull_chain(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the lower convex hull of the graph points.

    Monotone-chain scan; xs must be strictly increasing.  ys entries equal
    to +inf are treated as absent constraints.
    """
    finite = np.isfinite(ys)
    px, py = xs[finite], ys[finite]
    if len(px) == 0:
        raise InvariantViolation("hull of empty (all +inf) sample set")
    stack: list[int] = []
    for i in range(len(px)):
        while len(stack) >= 2:
            i0, i1 = stack[-2], stack[-1]
            # pop i1 when it lies on or above the chord i0 -> i
            if (py[i1] - py[i0]) * (px[i] - px[i0]) >= \
                    (py[i] - py[i0]) * (px[i1] - px[i0]):
                stack.pop()
            else:
                break
        stack.append(i)
    return px[stack], py[stack]


def _hull_values(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Lower convex hull evaluated back at every xs; +inf outside its span."""
    hx, hy = _hull_chain(xs, ys)
    out = np.full_like(ys, np.inf, dtype=float)
    inside = (xs >= hx[0]) & (xs <= hx[-1])
    out[inside] = np.interp(xs[inside], hx, hy)
    return out


def lower_convex_hull(xs, values) -> DualPotential:
    """Greatest convex minorant of dual-side samples on [0, 1].

    Shared kernel for the psh projection and dual-side cutoffs.  Input
    values may contain +inf (absent constraints); the result is +inf
    outside the span of the finite samples.  Idempotent.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(xs) != len(values) or len(xs) == 0:
        raise ValueError("need matching, nonempty xs and values")
    return DualPotential(_hull_values(xs, values))


def make_potential(phi, slope_left, slope_right, cfg: ModelConfig = DEFAULT_CONFIG,
                   *, left_tail: PowerTail | None = None,
                   repair: bool = True) -> RadialPotential:
    """Validate (and, within tolerance, repair) a sampled profile.

    Convexity violations up to ``convexity_tol * (1 + |phi|_inf)`` are
    repaired by passing to the lower convex hull of the samples; larger
    violations raise :class:`InvariantViolation`.  The discrete slopes must
    stay inside ``[slope_left - tol, slope_right + tol]``.
    """
    grid = cfg.grid
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.N,):
        raise InvariantViolation("phi sample count does not match grid")
    scale = 1.0 + float(np.max(np.abs(phi)))
    tol = cfg.convexity_tol * scale
    m = np.diff(phi) / grid.ds
    if len(m) > 1 and float(np.min(np.diff(m))) < 0.0:
        hull = _hull_values(grid.s, phi)
        deviation = float(np.max(phi - hull))
        if deviation > tol or not repair:
            raise InvariantViolation(
                f"profile is non-convex beyond tolerance (deviation {deviation:.3e})")
        phi = hull
        m = np.diff(phi) / grid.ds
    lo = float(np.min(m, initial=np.inf))
    hi = float(np.max(m, initial=-np.inf))
    slope_tol = max(tol / grid.ds, 1e-9)
    if lo < slope_left - slope_tol or hi > slope_right + slope_tol:
        raise InvariantViolation(
            f"discrete slopes [{lo:.6f}, {hi:.6f}] escape the declared tail "
            f"window [{slope_left:.6f}, {slope_right:.6f}]")
    slope_left = float(min(max(slope_left, 0.0), 1.0))
    slope_right = float(min(max(slope_right, 0.0), 1.0))
    return RadialPotential(grid, phi, slope_left, slope_right, left_tail=left_tail)


def make_dual(values, cfg: ModelConfig = DEFAULT_CONFIG, *,
              repair: bool = True) -> DualPotential:
    """Validate (and repair within tolerance) dual samples on x_j = j/M."""
    values = np.asarray(values, dtype=float)
    dual = DualPotential(values)  # window / shape checks
    fin = dual.finite_values()
    if len(fin) >= 3 and float(np.min(np.diff(fin, 2))) < 0.0:
        scale = 1.0 + float(np.max(np.abs(fin)))
        tol = cfg.convexity_tol * scale
        hull = _hull_values(dual.xs, values)
        deviation = float(np.max(np.where(np.isfinite(values),
                                          values - hull, 0.0)))
        if deviation > tol or not repair:
            raise InvariantViolation(
                f"dual samples non-convex beyond tolerance (deviation {deviation:.3e})")
        return DualPotential(hull)
    return dual


# ---------------------------------------------------------------------------
# Legendre transforms
# ---------------------------------------------------------------------------

def dual_of(u: RadialPotential, cfg: ModelConfig = DEFAULT_CONFIG, *,
            naive: bool = False) -> DualPotential:
    """Legendre transform of a profile onto the momentum grid.

    The fast path merges the two sorted slope sequences in linear time:
    for each x the conjugate is attained at the first grid point whose
    outgoing slope reaches x (the smallest maximizer, which downstream
    velocity evaluation relies on).  ``naive=True`` forces the quadratic
    reference sup, kept as a test oracle.

    The linear tails contribute in closed form: the transform is finite
    exactly on [slope_left, slope_right] and there the sup over each tail
    is attained at the corresponding grid edge.
    """
    if not naive and u.dual_cache is not None and \
            u.dual_cache.M == cfg.dual_points:
        return u.dual_cache
    xs = cfg.dual_xs()
    s = u.grid.s
    if naive:
        vals = np.full(len(xs), -np.inf)
        chunk = max((1 << 22) // u.grid.N, 1)
        for j0 in range(0, len(xs), chunk):
            block = xs[j0:j0 + chunk]
            vals[j0:j0 + len(block)] = np.max(
                np.outer(block, s) - u.phi[None, :], axis=1)
    else:
        m = np.maximum.accumulate(u.slopes())
        idx = np.searchsorted(m, xs - 1e-12, side="left")
        idx = np.minimum(idx, u.grid.N - 1)
        vals = xs * s[idx] - u.phi[idx]
    outside = (xs < u.slope_left - 1e-12) | (xs > u.slope_right + 1e-12)
    vals = np.where(outside, np.inf, vals)
    dual = DualPotential(vals)
    if not naive and u.dual_cache is None:
        object.__setattr__(u, "dual_cache", dual)
    return dual


# slope ties in a conjugate search must resolve to the smallest maximizer
# even under floating-point jitter along affine stretches
_TIE_TOL = 1e-9


def primal_of(psi: DualPotential, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Inverse transform: profile samples from dual samples.

    The effective-domain endpoints become the tail slopes.  The returned
    potential remembers ``psi`` so that round trips through the dual grid
    are exact for objects born there.
    """
    grid = cfg.grid
    ja, jb = psi.window
    xs, vals = psi.xs[ja:jb + 1], psi.values[ja:jb + 1]
    s = grid.s
    if len(xs) == 1:
        phi = s * xs[0] - vals[0]
    else:
        dx = xs[1] - xs[0]
        sig = np.maximum.accumulate(np.diff(vals) / dx)
        idx = np.minimum(np.searchsorted(sig, s - _TIE_TOL, side="left"),
                         len(xs) - 1)
        phi = s * xs[idx] - vals[idx]
    pot = RadialPotential(grid, phi, float(xs[0]), float(xs[-1]))
    object.__setattr__(pot, "dual_cache", psi)
    return pot


def conjugate_argmax(psi: DualPotential, s_values) -> np.ndarray:
    """Smallest maximizer indices of x -> x*s - psi(x), per s value."""
    ja, jb = psi.window
    xs, vals = psi.xs[ja:jb + 1], psi.values[ja:jb + 1]
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    if len(xs) == 1:
        return np.full(len(s_values), ja)
    dx = xs[1] - xs[0]
    sig = np.maximum.accumulate(np.diff(vals) / dx)
    idx = np.minimum(np.searchsorted(sig, s_values - _TIE_TOL, side="left"),
                     len(xs) - 1)
    return idx + ja


# ---------------------------------------------------------------------------
# Monge-Ampere measure, cutoffs, pointwise lattice operations
# ---------------------------------------------------------------------------

def ma_measure(u: RadialPotential) -> MAMeasure:
    """Distributional second derivative of the profile.

    Node ``i`` carries the slope increase across ``s_i``; the poles carry
    the slope deficits ``slope_left`` and ``1 - slope_right``.  Total mass
    is exactly 1 by telescoping, and the interior (non-pluripolar) mass is
    ``slope_right - slope_left``.
    """
    m = u.slopes()
    masses = np.empty(u.grid.N)
    masses[0] = m[0] - u.slope_left
    masses[1:-1] = np.diff(m)
    masses[-1] = u.slope_right - m[-1]
    masses = np.maximum(masses, 0.0)
    # slope jitter at the rounding floor is not curvature: the exact
    # piecewise-linear object has none along affine stretches
    masses[masses < 1e-12] = 0.0
    return MAMeasure(u.grid, masses, float(u.slope_left),
                     float(1.0 - u.slope_right))


def cutoff(u: RadialPotential, h: float, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Canonical bounded truncation max(u, -h).

    Pointwise maximum of two admissible profiles is admissible, so no
    re-hulling happens.  The truncated object always has full mass: the
    floor profile wins at both poles whenever the original had a slope
    deficit there (possibly beyond the grid edge, which only the tail
    slopes can see).  The analytic tail annotation does not survive a
    truncation; energy schedules handle ideal cutoffs themselves.
    """
    if h < 0:
        raise ValueError("cutoff depth h must be nonnegative")
    floor = phi_fs(u.grid.s) - h
    phi = np.maximum(u.phi, floor)
    return RadialPotential(u.grid, phi, 0.0, 1.0)


def shift(u: RadialPotential, c: float) -> RadialPotential:
    """u + c; the cached dual shifts by -c, keeping round trips exact."""
    out = RadialPotential(u.grid, u.phi + c, u.slope_left, u.slope_right,
                          left_tail=u.left_tail)
    if u.dual_cache is not None:
        object.__setattr__(out, "dual_cache",
                           DualPotential(u.dual_cache.values - c))
    return out


def scale_relative(u: RadialPotential, t: float) -> RadialPotential:
    """Profile of t*u, i.e. (1-t) phi_FS + t phi; admissible for t in [0,1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("relative scaling only defined for t in [0, 1]")
    base = phi_fs(u.grid.s)
    phi = (1.0 - t) * base + t * u.phi
    return RadialPotential(u.grid, phi, t * u.slope_left,
                           1.0 - t * (1.0 - u.slope_right))


def pointwise_max(u: RadialPotential, v: RadialPotential) -> RadialPotential:
    """max(u, v), again admissible; tail slopes follow the winning tail."""
    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    return RadialPotential(u.grid, np.maximum(u.phi, v.phi),
                           min(u.slope_left, v.slope_left),
                           max(u.slope_right, v.slope_right))


def pointwise_min_obstacle(u: RadialPotential, v: RadialPotential):
    """min(u, v) as raw obstacle data (samples, tail slopes); not convex."""
    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    return (np.minimum(u.phi, v.phi),
            max(u.slope_left, v.slope_left),
            min(u.slope_right, v.slope_right))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def potential_to_dict(u: RadialPotential) -> dict:
    d = {
        "grid": {"S": u.grid.S, "N": u.grid.N},
        "phi": u.phi.tolist(),
        "slope_left": u.slope_left,
        "slope_right": u.slope_right,
    }
    if u.left_tail is not None:
        d["left_tail"] = {"alpha": u.left_tail.alpha, "coeff": u.left_tail.coeff}
    return d


def potential_from_dict(d: dict) -> RadialPotential:
    grid = Grid(float(d["grid"]["S"]), int(d["grid"]["N"]))
    tail = None
    if d.get("left_tail") is not None:
        tail = PowerTail(float(d["left_tail"]["alpha"]),
                         float(d["left_tail"]["coeff"]))
    return RadialPotential(grid, np.asarray(d["phi"], dtype=float),
                           float(d["slope_left"]), float(d["slope_right"]),
                           left_tail=tail)


def dual_to_dict(psi: DualPotential) -> dict:
    vals = ["inf" if not np.isfinite(v) else float(v) for v in psi.values]
    return {"M": psi.M, "values": vals}


def dual_from_dict(d: dict) -> DualPotential:
    vals = np.array([np.inf if v == "inf" else float(v) for v in d["values"]])
    if len(vals) != int(d["M"]) + 1:
        raise InvariantViolation("dual sample count does not match M")
    return DualPotential(vals)


def potential_to_json(u: RadialPotential) -> str:
    return json.dumps(potential_to_dict(u), sort_keys=True)


def potential_from_json(s: str) -> RadialPotential:
    return potential_from_dict(json.loads(s))
