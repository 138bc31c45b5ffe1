"""Weak geodesic segments between invariant potentials.

In this model the weak geodesic joining two potentials is linear in the
dual picture: ``psi_t = (1-t) psi_0 + t psi_1``, with +inf absorbing.
The segment degenerates to identically minus infinity exactly when the
dual effective domains are disjoint, which coincides with rooftop
failure.  Endpoint evaluation deliberately returns the stored endpoints
rather than the dual limit, so the discontinuity of the t -> 0 limit
(when the endpoints cannot be reached in capacity) stays observable.

The module also carries the two independent reconstructions used as
oracles: the Legendre slice ``inf_t (u_t - tau t)``, which must agree
with the rooftop ``P(u0, u1 - tau)``, and the sup-over-tau inversion of
that identity, which rebuilds the whole path from rooftops alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capacity import RadialSet, capacity
from .core import (
    DEFAULT_CONFIG,
    ClassError,
    DualPotential,
    ModelConfig,
    RadialPotential,
    conjugate_argmax,
    dual_of,
    primal_of,
    shift,
)
from .envelopes import rooftop, rooftop_singularity

__all__ = [
    "Geodesic",
    "build_geodesic",
    "evaluate",
    "velocity",
    "TauSupPath",
    "geodesic_via_tau_sup",
    "tau_slice",
    "EndpointClassification",
    "endpoint_limit",
    "convex_endpoint_limits",
]

FINITE = "finite"
MINUS_INF = "identically_minus_infinity"


@dataclass(frozen=True)
class Geodesic:
    """A weak geodesic segment: endpoints plus the dual-linear law."""

    u0: RadialPotential
    u1: RadialPotential
    psi0: DualPotential
    psi1: DualPotential
    status: str

    def dual_at(self, t: float) -> DualPotential:
        if self.status != FINITE:
            raise RuntimeError("geodesic is identically -inf; no interior values")
        if not 0.0 <= t <= 1.0:
            raise ValueError("geodesic parameter must lie in [0, 1]")
        if t == 0.0:
            vals = np.where(np.isfinite(self.psi1.values), self.psi0.values, np.inf)
        elif t == 1.0:
            vals = np.where(np.isfinite(self.psi0.values), self.psi1.values, np.inf)
        else:
            vals = (1.0 - t) * self.psi0.values + t * self.psi1.values
        return DualPotential(vals)

    def at(self, t: float, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
        return evaluate(self, t, cfg)


def build_geodesic(u0: RadialPotential, u1: RadialPotential,
                   cfg: ModelConfig = DEFAULT_CONFIG) -> Geodesic:
    """Connect two potentials; degeneration is a status, not an exception."""
    psi0 = dual_of(u0, cfg)
    psi1 = dual_of(u1, cfg)
    overlap = np.isfinite(psi0.values) & np.isfinite(psi1.values)
    status = FINITE if overlap.any() else MINUS_INF
    return Geodesic(u0, u1, psi0, psi1, status)


def evaluate(g: Geodesic, t: float, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Potential at time t; t = 0, 1 return the stored endpoints exactly."""
    if g.status != FINITE:
        raise RuntimeError("geodesic is identically -inf; nothing to evaluate")
    if not 0.0 <= t <= 1.0:
        raise ValueError("geodesic parameter must lie in [0, 1]")
    if t == 0.0:
        return g.u0
    if t == 1.0:
        return g.u1
    return primal_of(g.dual_at(t), cfg)


def velocity(g: Geodesic, t: float, s=None) -> np.ndarray:
    """Time derivative of the path at (t, s).

    Evaluated as -(psi1 - psi0) at the smallest conjugate maximizer of
    the time-t dual; one-sided at the endpoints, where the maximizer is
    taken over the common effective domain (so the difference is always
    finite - the domain bookkeeping rules out inf - inf).
    """
    if g.status != FINITE:
        raise RuntimeError("geodesic is identically -inf; no velocity")
    psi_t = g.dual_at(t)
    if s is None:
        s = g.u0.grid.s
    idx = conjugate_argmax(psi_t, s)
    diff = g.psi1.values[idx] - g.psi0.values[idx]
    if not np.all(np.isfinite(diff)):
        raise AssertionError("velocity hit inf - inf; domain bookkeeping broken")
    return -diff


@dataclass(frozen=True)
class TauSupPath:
    """Path rebuilt from rooftops: u_t = sup_tau (P(u0, u1 - tau) + tau t)."""

    t_grid: np.ndarray
    tau_grid: np.ndarray
    profiles: np.ndarray          # shape (len(t_grid), N)
    edge_attained: bool           # sup hit the tau boundary at an interior t

    def profile(self, k: int) -> np.ndarray:
        return self.profiles[k]


def default_tau_span(u0: RadialPotential, u1: RadialPotential) -> float:
    return float(np.max(np.abs(u0.phi - u1.phi))) + 4.0


def geodesic_via_tau_sup(u0: RadialPotential, u1: RadialPotential,
                         tau_grid=None, t_grid=None,
                         cfg: ModelConfig = DEFAULT_CONFIG) -> TauSupPath:
    """Independent reconstruction of the segment from rooftop slices.

    A too-narrow tau span is detected by the sup being attained on the
    tau boundary at some interior time; callers treat the flag as an
    invalid reconstruction.
    """
    if tau_grid is None:
        T = default_tau_span(u0, u1)
        tau_grid = np.linspace(-T, T, 81)
    else:
        tau_grid = np.asarray(tau_grid, dtype=float)
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 17)
    else:
        t_grid = np.asarray(t_grid, dtype=float)

    slices = np.empty((len(tau_grid), u0.grid.N))
    for k, tau in enumerate(tau_grid):
        roof = rooftop(u0, shift(u1, -tau), cfg)
        slices[k] = roof.phi  # full-overlap callers only; -inf would raise
    profiles = np.empty((len(t_grid), u0.grid.N))
    edge = False
    for k, t in enumerate(t_grid):
        cand = slices + np.multiply.outer(tau_grid * t, np.ones(u0.grid.N))
        arg = np.argmax(cand, axis=0)
        profiles[k] = cand[arg, np.arange(u0.grid.N)]
        if 0.0 < t < 1.0:
            edge = edge or bool(np.any((arg == 0) | (arg == len(tau_grid) - 1)))
    return TauSupPath(t_grid, tau_grid, profiles, edge)


def tau_slice(g: Geodesic, tau: float, t_points: int = 513,
              cfg: ModelConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Legendre slice inf_t (u_t(s) - tau t), sampled on the grid.

    This is the left side of the identity that pins the slice to the
    rooftop P(u0, u1 - tau); the minimum over t of a convex profile is
    taken on a fine grid with the endpoint duals included.
    """
    if g.status != FINITE:
        raise RuntimeError("geodesic is identically -inf")
    ts = np.linspace(0.0, 1.0, t_points)
    n = g.u0.grid.N
    best = np.full(n, np.inf)
    for t in ts:
        u_t = primal_of(g.dual_at(float(t)), cfg).phi
        np.minimum(best, u_t - tau * t, out=best)
    return best


# ---------------------------------------------------------------------------
# Endpoint convergence classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EndpointClassification:
    """Two independent verdicts on whether an endpoint is attained.

    ``capacity_attained`` watches Cap{|u_t - u_end| > eps} decay along a
    geometric t-schedule; ``rooftop_attained`` asks whether the envelope
    through the other endpoint's singularity type returns the endpoint.
    The two must agree on every fixture; their agreement is the theorem.
    """

    end: int
    t_schedule: np.ndarray
    eps_list: tuple[float, ...]
    caps: np.ndarray              # shape (len(eps_list), len(t_schedule))
    capacity_attained: bool
    rooftop_attained: bool

    @property
    def agree(self) -> bool:
        return self.capacity_attained == self.rooftop_attained


def _dual_identity(candidate: RadialPotential, target: RadialPotential,
                   cfg: ModelConfig, tol: float = 1e-8) -> bool:
    """Do the two potentials have identical duals (domain and values)?"""
    a = dual_of(candidate, cfg).values
    b = dual_of(target, cfg).values
    fa, fb = np.isfinite(a), np.isfinite(b)
    if not np.array_equal(fa, fb):
        return False
    return float(np.max(np.abs(a[fa] - b[fb]), initial=0.0)) <= tol


def endpoint_limit(g: Geodesic, end: int, eps_list=(0.05, 0.1, 0.2),
                   t_schedule=None, cap_threshold: float = 1e-3,
                   cfg: ModelConfig = DEFAULT_CONFIG) -> EndpointClassification:
    """Classify convergence of u_t to the chosen endpoint."""
    if g.status != FINITE:
        raise RuntimeError("geodesic is identically -inf")
    if end not in (0, 1):
        raise ValueError("end must be 0 or 1")
    if t_schedule is None:
        t_schedule = 2.0 ** -np.arange(2, 11)
    t_schedule = np.asarray(sorted(t_schedule, reverse=True), dtype=float)
    u_end = g.u0 if end == 0 else g.u1
    other = g.u1 if end == 0 else g.u0

    caps = np.empty((len(eps_list), len(t_schedule)))
    for j, tt in enumerate(t_schedule):
        t = tt if end == 0 else 1.0 - tt
        u_t = evaluate(g, float(t), cfg)
        diff = np.abs(u_t.phi - u_end.phi)
        for i, eps in enumerate(eps_list):
            mask = diff > eps
            caps[i, j] = 0.0 if not mask.any() else capacity(
                RadialSet.from_mask(mask, g.u0.grid), cfg)
    capacity_attained = bool(np.all(caps[:, -1] <= cap_threshold))

    env = rooftop_singularity(u_end, other, cfg=cfg)
    rooftop_attained = (not env.is_minus_inf()) and env.converged and \
        _dual_identity(env.potential, u_end, cfg)

    return EndpointClassification(end, t_schedule, tuple(eps_list), caps,
                                  capacity_attained, rooftop_attained)


# ---------------------------------------------------------------------------
# Convex-profile utility behind the endpoint argument
# ---------------------------------------------------------------------------

def convex_endpoint_limits(f, t_grid, tau_grid) -> tuple[float, float]:
    """For a bounded convex profile on (0,1): the t -> 0 limit equals
    the tau -> -inf limit of inf_t (f(t) - tau t).

    Returns the two estimates (value near t = 0, and the Legendre-side
    limit at the most negative tau).  A standalone check of the slicing
    lemma on synthetic data, independent of any potential machinery.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    f_vals = np.asarray([f(t) for t in t_grid], dtype=float) \
        if callable(f) else np.asarray(f, dtype=float)
    left = float(f_vals[np.argmin(t_grid)])
    tau_grid = np.asarray(tau_grid, dtype=float)
    infs = [float(np.min(f_vals - tau * t_grid)) for tau in tau_grid]
    legendre = infs[int(np.argmin(tau_grid))]
    return left, legendre
