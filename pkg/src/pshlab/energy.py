"""Weighted energies, the Aubin-Mabuchi functional, and class membership.

Energies are integrals of a weight applied to the potential against its
own Monge-Ampere measure.  For a grid profile this is an exact finite
sum over the curvature nodes; a dual-side quadrature recomputes the same
number through the momentum change of variables and the two must agree,
otherwise the operation refuses to answer.

Unbounded behaviour enters in two ways.  A pole atom weights chi(-inf)
and makes every energy -inf outright.  An analytic power tail keeps full
mass but may or may not have finite energy; that verdict belongs to the
divergence detector, which watches the energies of canonical cutoffs
along a doubling depth schedule and declares -inf when the increments
stop decaying (or the values fall through the floor).  No symbolic
convergence test is consulted anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .core import (
    DEFAULT_CONFIG,
    ClassError,
    ConsistencyError,
    ModelConfig,
    PowerTail,
    RadialPotential,
    cutoff,
    dual_of,
    ma_measure,
    make_potential,
    phi_fs,
)
from .envelopes import is_minus_inf, rooftop

__all__ = [
    "Weight",
    "CHI_HALF",
    "CHI_ONE",
    "CHI_TWO",
    "energy",
    "node_sum_energy",
    "dual_quadrature_energy",
    "cutoff_energy_schedule",
    "DivergenceVerdict",
    "divergence_verdict",
    "DEFAULT_H_SCHEDULE",
    "aubin_mabuchi",
    "MembershipReport",
    "class_membership",
    "fundamental_ratio",
    "energy_of_rooftop_check",
    "reference_potential",
    "tail_finiteness_law",
]

DEFAULT_H_SCHEDULE = tuple(float(2 ** k) for k in range(17))
ENERGY_FLOOR = -1e12


@dataclass(frozen=True)
class Weight:
    """Power weight chi_p(t) = -(-t)^p for t <= 0, chi_p(t) = t for t > 0.

    Convex (class W-) for p <= 1, concave with |t chi'(t)| <= p |chi(t)|
    (class W+_p) for p >= 1; p = 1 sits in both.
    """

    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("weight exponent must be positive")

    @property
    def in_w_minus(self) -> bool:
        return self.p <= 1.0

    @property
    def in_w_plus(self) -> bool:
        return self.p >= 1.0

    @property
    def concavity_constant(self) -> float:
        """The M in the |t chi'| <= M |chi| bound; meaningful for p >= 1."""
        return max(self.p, 1.0)

    @property
    def name(self) -> str:
        return f"chi_{self.p:g}"

    def chi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        neg = np.minimum(t, 0.0)
        return np.where(t > 0.0, t, -np.power(-neg, self.p))


CHI_HALF = Weight(0.5)
CHI_ONE = Weight(1.0)
CHI_TWO = Weight(2.0)


@lru_cache(maxsize=8)
def reference_potential(cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """The zero relative potential (round-metric profile) on this grid."""
    return make_potential(phi_fs(cfg.grid.s), 0.0, 1.0, cfg)


# ---------------------------------------------------------------------------
# The two finite-energy routes
# ---------------------------------------------------------------------------

def node_sum_energy(u: RadialPotential, w: Weight, *,
                    skip_left_edge: bool = False) -> float:
    """Exact energy of the grid object: sum of chi(u) over curvature nodes.

    The piecewise-linear profile's measure is a finite sum of node atoms,
    so this is the true integral, not a quadrature.  Pole atoms are the
    caller's business.  ``skip_left_edge`` leaves out node 0, whose mass
    belongs to the analytic tail when one is declared.
    """
    mu = ma_measure(u)
    vals = w.chi(u.u)
    start = 1 if skip_left_edge else 0
    return float(np.dot(vals[start:], mu.node_masses[start:]))


def dual_quadrature_energy(u: RadialPotential, w: Weight,
                           cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Energy through the momentum change of variables.

    With x the momentum and s = psi'(x), the potential at the pushforward
    point is x psi'(x) - psi(x) - phi_FS(psi'(x)); the measure becomes
    Lebesgue dx.  Midpoint rule per dual cell over the effective domain.
    """
    psi = dual_of(u, cfg)
    ja, jb = psi.window
    xs, vals = psi.xs[ja:jb + 1], psi.values[ja:jb + 1]
    if len(xs) < 2:
        return 0.0
    dx = xs[1] - xs[0]
    sig = (vals[1:] - vals[:-1]) / dx
    x_mid = 0.5 * (xs[1:] + xs[:-1])
    v_mid = 0.5 * (vals[1:] + vals[:-1])
    u_mid = x_mid * sig - v_mid - phi_fs(sig)
    return float(np.sum(w.chi(u_mid)) * dx)


# ---------------------------------------------------------------------------
# Divergence detection on cutoff schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceVerdict:
    finite: bool
    value: float                 # last schedule value (or -inf)
    increment_ratio: float | None

    def __bool__(self):
        return self.finite


def divergence_verdict(values, floor: float = ENERGY_FLOOR) -> DivergenceVerdict:
    """Decide finite vs -inf from cutoff energies along a doubling schedule.

    The sequence decreases; it has a finite limit iff the increments are
    summable.  On a doubling schedule genuine tails act geometrically, so
    the verdict reads the late increment ratio: decaying increments pass
    the Cauchy test, non-decaying ones fail.  Values below the floor are
    -inf regardless.
    """
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        raise ValueError("empty schedule")
    if v[-1] < floor:
        return DivergenceVerdict(False, float("-inf"), None)
    deltas = np.maximum(v[:-1] - v[1:], 0.0)
    sig = deltas[deltas > 1e-12]
    if len(sig) < 3:
        return DivergenceVerdict(True, float(v[-1]), None)
    tail = sig[-6:]
    ratios = tail[1:] / tail[:-1]
    r = float(np.exp(np.mean(np.log(np.maximum(ratios, 1e-300)))))
    return DivergenceVerdict(r < 1.0, float(v[-1]) if r < 1.0 else float("-inf"), r)


def cutoff_energy_schedule(u: RadialPotential, w: Weight,
                           h_schedule=DEFAULT_H_SCHEDULE,
                           cfg: ModelConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Energies of the canonical cutoffs max(u, -h) along the schedule.

    Grid-only objects saturate once h passes their depth (the cutoff is
    then the object itself); declared power tails continue analytically:
    past the grid edge the cutoff's energy splits into the grid sum, a
    closed-form tail integral down to the kink, and the kink atom at
    depth h.  The round measure's own tail weight under the kink is below
    1e-13 and is dropped.
    """
    values = []
    tail = u.left_tail
    edge_depth = float(-tail.u(-u.grid.S)) if tail is not None else np.inf
    interior = node_sum_energy(u, w, skip_left_edge=True) \
        if tail is not None else None
    for h in h_schedule:
        if tail is None or h <= edge_depth:
            values.append(node_sum_energy(cutoff(u, h, cfg), w))
        else:
            sigma_h = -tail.s_where_depth(h)
            t_int = _tail_energy_integral(tail, w, u.grid.S, sigma_h)
            kink = float(w.chi(-h)) * float(tail.u_prime(-sigma_h))
            values.append(interior + t_int + kink)
    return np.asarray(values)


def _tail_energy_integral(tail: PowerTail, w: Weight,
                          sigma_lo: float, sigma_hi: float) -> float:
    """Integral of chi(u) against the tail curvature over [sigma_lo, sigma_hi].

    Log substitution keeps the range tame even when the cutoff kink sits
    astronomically far out.
    """
    if sigma_hi <= sigma_lo:
        return 0.0
    a, c, p = tail.alpha, tail.coeff, w.p

    def integrand(y):
        # everything in log space: sigma = e^y can exceed float range at the
        # deepest cutoffs, but chi(u) u'' sigma ~ sigma^((p+1)a - 2) stays tame
        log1p_s2 = 2.0 * y + np.log1p(np.exp(-2.0 * y))
        half = 0.5 * a * log1p_s2
        # chi_p(u) = -(c ((1+s^2)^(a/2) - 1))^p, u'' = c a (1+s^2)^(a/2-2) ((1-a)s^2 - 1)
        log_chi = p * (np.log(c) + half + np.log1p(-np.exp(-half)))
        log_upp = np.log(c * a) + (0.5 * a - 2.0) * log1p_s2 + \
            np.log((1.0 - a) - np.exp(-2.0 * y)) + 2.0 * y
        return -np.exp(log_chi + log_upp + y)

    val, _ = quad(integrand, np.log(sigma_lo), np.log(sigma_hi), limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# The energy operation
# ---------------------------------------------------------------------------

def energy(u: RadialPotential, w: Weight,
           cfg: ModelConfig = DEFAULT_CONFIG, *, reconcile: bool = True) -> float:
    """Weighted energy of a potential; -inf is a value, not an error.

    A slope deficit at either pole is a Monge-Ampere atom sitting at
    potential value -inf, so the energy is -inf immediately (the cutoff
    schedule diverges accordingly; the regression suite keeps the two
    routes honest).  Full-mass grid objects evaluate exactly as a node
    sum, reconciled against the dual quadrature; declared power tails are
    judged by the divergence detector on the analytic cutoff schedule.
    """
    memo = _memo(u)
    key = (w.p, cfg.dual_points, reconcile)
    if key in memo:
        return memo[key]
    value = _energy_impl(u, w, cfg, reconcile)
    memo[key] = value
    return value


def _memo(u: RadialPotential) -> dict:
    memo = u.__dict__.get("_energy_memo")
    if memo is None:
        memo = {}
        u.__dict__["_energy_memo"] = memo
    return memo


def _energy_impl(u, w, cfg, reconcile):
    if u.slope_left > 1e-12 or u.slope_right < 1.0 - 1e-12:
        return float("-inf")
    if u.left_tail is not None:
        sched = cutoff_energy_schedule(u, w, DEFAULT_H_SCHEDULE, cfg)
        verdict = divergence_verdict(sched)
        if not verdict.finite:
            return float("-inf")
        interior = node_sum_energy(u, w, skip_left_edge=True)
        return interior + _tail_energy_integral(u.left_tail, w, u.grid.S, np.inf)
    e_nodes = node_sum_energy(u, w)
    if reconcile:
        e_dual = dual_quadrature_energy(u, w, cfg)
        if abs(e_dual - e_nodes) > 1e-3 * (1.0 + abs(e_nodes)):
            raise ConsistencyError(
                f"energy routes disagree: node sum {e_nodes:.6g} vs dual "
                f"quadrature {e_dual:.6g}")
    return e_nodes


def tail_finiteness_law(alpha: float, w: Weight) -> bool:
    """Independent oracle for the power-tail family: finite iff (p+1)a < 1.

    This is the tail-exponent integral test the detector is measured
    against in the tests; the detector itself never consults it.
    """
    return (w.p + 1.0) * alpha < 1.0


# ---------------------------------------------------------------------------
# Aubin-Mabuchi energy
# ---------------------------------------------------------------------------

def aubin_mabuchi(u: RadialPotential, cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Monotone primitive of the Monge-Ampere operator, normalized to 0 at 0.

    In the dual picture this is minus the mean of psi_u - psi_0 over the
    momentum interval; its derivative along any dual-linear path is the
    integral of the path velocity against the moving measure, which makes
    it affine along weak geodesics.  Requires finite chi_1 energy;
    returns -inf otherwise.
    """
    if energy(u, CHI_ONE, cfg) == float("-inf"):
        return float("-inf")
    psi = dual_of(u, cfg)
    psi0 = dual_of(reference_potential(cfg), cfg)
    xs = psi.xs
    diff = psi.values - psi0.values
    return -float(np.trapezoid(diff, xs))


# ---------------------------------------------------------------------------
# Class membership and inequality margins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MembershipReport:
    in_full_mass_class: bool
    lelong_neg: float
    lelong_pos: float
    finite: dict
    values: dict


def class_membership(u: RadialPotential, weights,
                     cfg: ModelConfig = DEFAULT_CONFIG) -> MembershipReport:
    """Full-mass flag, Lelong data, and per-weight finiteness."""
    finite, values = {}, {}
    for w in weights:
        e = energy(u, w, cfg)
        finite[w.p] = e > float("-inf")
        values[w.p] = e
    return MembershipReport(
        in_full_mass_class=u.is_full_mass(),
        lelong_neg=float(u.slope_left),
        lelong_pos=float(1.0 - u.slope_right),
        finite=finite,
        values=values,
    )


def fundamental_ratio(u: RadialPotential, v: RadialPotential, w: Weight,
                      cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """E(u)/E(v) for u <= v <= 0; the uniform-bound probe for the
    fundamental estimate.  Both energies must be finite and E(v) nonzero."""
    tol = 1e-9 * max(u.value_scale(), v.value_scale())
    if np.any(u.phi > v.phi + tol) or np.any(v.u > tol):
        raise ValueError("fundamental ratio needs u <= v <= 0 pointwise")
    eu, ev = energy(u, w, cfg), energy(v, w, cfg)
    if eu == float("-inf") or ev == float("-inf"):
        raise ClassError("fundamental ratio needs finite energies")
    if abs(ev) < 1e-12:
        raise ValueError("denominator energy vanishes; ratio undefined")
    return eu / ev


def energy_of_rooftop_check(u0: RadialPotential, u1: RadialPotential, w: Weight,
                            cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Margin of the rooftop energy bound.

    E(P(u0,u1)) >= E(u0) + E(u1) - N with N the grid sup of the weighted
    potentials (unit volume); returns the left-minus-right margin.
    """
    e0, e1 = energy(u0, w, cfg), energy(u1, w, cfg)
    if e0 == float("-inf") or e1 == float("-inf"):
        raise ClassError("rooftop energy bound needs finite-energy inputs")
    n_val = max(float(np.max(w.chi(u0.u))), float(np.max(w.chi(u1.u))))
    roof = rooftop(u0, u1, cfg)
    if is_minus_inf(roof):
        raise ClassError("rooftop degenerated despite finite energies")
    ep = energy(roof, w, cfg)
    return ep - e0 - e1 + n_val
