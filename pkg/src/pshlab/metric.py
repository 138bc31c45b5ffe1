"""The extended path-length metric on finite-square-energy potentials.

In the dual picture the metric is plainly Euclidean: the distance between
two potentials is the L2 norm of the difference of their duals over the
momentum interval, and weak geodesics are straight lines.  That closed
form is what this module computes; its claim to be the right metric is
certified by the independent path-energy (Chen-type) integral, which
agrees on regular fixtures and visibly fails on the Green-function pair,
exactly as it should.

Everything here restricts to the finite-square-energy class: distances
between potentials outside it raise, mirroring the fact that the metric
extension is only defined there.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    DEFAULT_CONFIG,
    ClassError,
    ModelConfig,
    RadialPotential,
    dual_of,
    ma_measure,
    scale_relative,
    shift,
)
from .energy import CHI_TWO, energy, reference_potential
from .envelopes import is_minus_inf, rooftop, rooftop_many
from .geodesics import build_geodesic, evaluate, velocity

__all__ = [
    "DistanceResult",
    "distance",
    "dual_l2_distance",
    "chen_distance",
    "is_smooth_dual",
    "SandwichMargins",
    "sandwich_check",
    "pythagoras_check",
    "contraction_check",
    "npc_check",
    "monotone_limit_distance",
    "NonCauchyError",
    "CompletionResult",
    "complete_cauchy",
]


class NonCauchyError(ValueError):
    """Input sequence is not summably Cauchy; carries the offending index."""

    def __init__(self, index: int, gap: float, prev_gap: float):
        self.index = index
        super().__init__(
            f"consecutive distances stop decaying at step {index}: "
            f"{gap:.3e} after {prev_gap:.3e}")


@lru_cache(maxsize=8)
def _trap_weights(m: int) -> np.ndarray:
    w = np.full(m + 1, 1.0 / m)
    w[0] *= 0.5
    w[-1] *= 0.5
    w.flags.writeable = False
    return w


def _require_e2(u: RadialPotential, cfg: ModelConfig):
    if not u.is_full_mass():
        raise ClassError("potential carries a pole atom; outside the metric's domain")
    if energy(u, CHI_TWO, cfg) == float("-inf"):
        raise ClassError("potential has infinite square energy; distance undefined")


def dual_l2_distance(u0: RadialPotential, u1: RadialPotential,
                     cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """The model's closed form: L2 norm of the dual difference."""
    a = dual_of(u0, cfg).values
    b = dual_of(u1, cfg).values
    w = _trap_weights(cfg.dual_points)
    d = a - b
    return float(np.sqrt(np.dot(w, d * d)))


def chen_distance(u0: RadialPotential, u1: RadialPotential, t: float,
                  cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Path-energy distance: sqrt of the velocity-squared integral at time t.

    Independent of the dual L2 form; it recomputes the metric from the
    moving potential's own measure and the path velocity.  Meaningful as
    a cross-check only on regular (smooth-dual) fixtures; on the Green
    pair it degenerates, which is the expected counterexample, so callers
    report rather than reconcile it.
    """
    g = build_geodesic(u0, u1, cfg)
    if g.status != "finite":
        raise ClassError("geodesic degenerated; no path energy")
    u_t = evaluate(g, t, cfg)
    mu = ma_measure(u_t)
    v = velocity(g, t)
    return float(np.sqrt(np.dot(v * v, mu.node_masses)))


def is_smooth_dual(u: RadialPotential, cfg: ModelConfig = DEFAULT_CONFIG) -> bool:
    """Discrete stand-in for bounded-Laplacian regularity.

    Requires the Monge-Ampere node masses bounded by 10/M (no curvature
    atoms: density bounded above) and the dual second differences bounded
    by 10/M (no flat primal stretches: density bounded below).  The
    distance cross-check is trusted exactly on this class.
    """
    bound = 10.0 / cfg.dual_points
    mu = ma_measure(u)
    if float(np.max(mu.node_masses)) > bound:
        return False
    psi = dual_of(u, cfg)
    fin = psi.finite_values()
    if len(fin) >= 3 and float(np.max(np.abs(np.diff(fin, 2)))) > bound:
        return False
    return True


@dataclass(frozen=True)
class DistanceResult:
    value: float
    method: str
    cross_check_delta: float | None

    def __float__(self):
        return self.value


def distance(u0: RadialPotential, u1: RadialPotential,
             cfg: ModelConfig = DEFAULT_CONFIG,
             cross_check: bool | str = "auto") -> DistanceResult:
    """Extended Mabuchi distance between finite-square-energy potentials.

    ``cross_check='auto'`` runs the path-energy integral at t in
    {0, 1/2, 1} whenever both inputs are smooth-dual and records the
    worst relative deviation; ``True`` forces it, ``False`` skips it.
    """
    _require_e2(u0, cfg)
    _require_e2(u1, cfg)
    value = dual_l2_distance(u0, u1, cfg)
    delta = None
    run_check = cross_check is True or (
        cross_check == "auto" and is_smooth_dual(u0, cfg) and is_smooth_dual(u1, cfg))
    if run_check:
        worst = 0.0
        for t in (0.0, 0.5, 1.0):
            c = chen_distance(u0, u1, t, cfg)
            worst = max(worst, abs(c - value))
        delta = worst / max(value, 1e-12)
    return DistanceResult(value, "dual_l2", delta)


# ---------------------------------------------------------------------------
# Inequality checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichMargins:
    lower: float   # d^2 - integral against the larger potential's measure
    upper: float   # integral against the smaller potential's measure - d^2


def sandwich_check(u: RadialPotential, v: RadialPotential,
                   cfg: ModelConfig = DEFAULT_CONFIG) -> SandwichMargins:
    """Two-sided comparison of d(u,v)^2 with the (v-u)^2 integrals, u <= v."""
    tol = 1e-9 * max(u.value_scale(), v.value_scale())
    if np.any(u.phi > v.phi + tol):
        raise ValueError("sandwich check needs u <= v pointwise")
    _require_e2(u, cfg)
    _require_e2(v, cfg)
    d2 = dual_l2_distance(u, v, cfg) ** 2
    gap = v.phi - u.phi
    i_u = float(np.dot(gap * gap, ma_measure(u).node_masses))
    i_v = float(np.dot(gap * gap, ma_measure(v).node_masses))
    return SandwichMargins(lower=d2 - i_v, upper=i_u - d2)


def pythagoras_check(u0: RadialPotential, u1: RadialPotential,
                     cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Residual of d(u0,u1)^2 = d(u0,P)^2 + d(P,u1)^2 with P the rooftop.

    In the dual picture this is the exact splitting of the L2 norm over
    the two sign regions of psi0 - psi1.
    """
    roof = rooftop(u0, u1, cfg)
    if is_minus_inf(roof):
        raise ClassError("rooftop degenerated; Pythagoras undefined")
    d = dual_l2_distance(u0, u1, cfg)
    d0 = dual_l2_distance(u0, roof, cfg)
    d1 = dual_l2_distance(roof, u1, cfg)
    return abs(d * d - d0 * d0 - d1 * d1)


def contraction_check(u: RadialPotential, v: RadialPotential, w: RadialPotential,
                      cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Margin d(v,w) - d(P(u,v), P(u,w)) of the rooftop contraction."""
    pv = rooftop(u, v, cfg)
    pw = rooftop(u, w, cfg)
    if is_minus_inf(pv) or is_minus_inf(pw):
        raise ClassError("rooftop degenerated; contraction undefined")
    return dual_l2_distance(v, w, cfg) - dual_l2_distance(pv, pw, cfg)


def npc_check(p: RadialPotential, q: RadialPotential, r: RadialPotential,
              lam: float, cfg: ModelConfig = DEFAULT_CONFIG) -> float:
    """Comparison-inequality margin at the point s = geodesic(q,r)(lam).

    margin = lam d(p,r)^2 + (1-lam) d(p,q)^2 - lam(1-lam) d(q,r)^2 - d(p,s)^2,
    nonnegative in any nonpositively curved space; the dual picture is
    flat, so the margin here is zero to rounding.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    dqr = dual_l2_distance(q, r, cfg)
    if dqr == 0.0:
        s = q
    else:
        s = evaluate(build_geodesic(q, r, cfg), lam, cfg)
    dps = dual_l2_distance(p, s, cfg)
    dpq = dual_l2_distance(p, q, cfg)
    dpr = dual_l2_distance(p, r, cfg)
    return lam * dpr ** 2 + (1.0 - lam) * dpq ** 2 \
        - lam * (1.0 - lam) * dqr ** 2 - dps ** 2


# ---------------------------------------------------------------------------
# Monotone limits and completeness
# ---------------------------------------------------------------------------

def monotone_limit_distance(seq, limit: RadialPotential,
                            cfg: ModelConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Distances of a pointwise-monotone sequence to its limit.

    Raises on non-monotone input; returns the distance per member, which
    for a sequence converging in the class must decay to zero.
    """
    seq = list(seq)
    if len(seq) >= 2:
        tol = 1e-9 * max(p.value_scale() for p in seq)
        diffs = [b.phi - a.phi for a, b in zip(seq[:-1], seq[1:])]
        inc = all(np.all(d >= -tol) for d in diffs)
        dec = all(np.all(d <= tol) for d in diffs)
        if not (inc or dec):
            raise ValueError("sequence is not pointwise monotone")
    _require_e2(limit, cfg)
    return np.asarray([dual_l2_distance(u, limit, cfg) for u in seq])


@dataclass(frozen=True)
class CompletionResult:
    """Outcome of the monotone-regularization completeness construction."""

    limit: RadialPotential
    gaps: np.ndarray                 # consecutive input distances
    distances_to_limit: np.ndarray   # d(u_k, limit)
    envelope_contraction_margins: np.ndarray
    halving_margins: np.ndarray


def complete_cauchy(seq, cfg: ModelConfig = DEFAULT_CONFIG) -> CompletionResult:
    """Limit of a summably-Cauchy sequence via monotone envelopes.

    Follows the completeness construction: replace the sequence by the
    increasing family v_k of tail envelopes (iterated rooftops of
    u_k, u_{k+1}, ...), whose members the rooftop contraction keeps as
    close together as the original sequence; the monotone family then
    converges and so does the original sequence, to the same limit.

    The summability precondition is enforced as geometric-type decay of
    the consecutive distances: each gap at most 0.95 of the previous one
    (up to a 1e-9 floor); the first violating index is reported.  The
    halving inequality d(0, u/2) <= d(0, u)/2 is checked for each member
    along the way, as in the original argument.
    """
    seq = list(seq)
    if len(seq) < 2:
        raise ValueError("need at least two potentials")
    for u in seq:
        _require_e2(u, cfg)
    gaps = np.asarray([dual_l2_distance(a, b, cfg)
                       for a, b in zip(seq[:-1], seq[1:])])
    for i in range(1, len(gaps)):
        if gaps[i] > 0.95 * gaps[i - 1] + 1e-9:
            raise NonCauchyError(i, float(gaps[i]), float(gaps[i - 1]))

    # tail envelopes v_k = P(u_k, ..., u_last); increasing in k, and each
    # step of the inner iteration contracts against the input gaps
    tails = [rooftop_many(seq[k:], cfg) for k in range(len(seq))]
    margins = []
    for k in range(len(seq) - 1):
        partial_prev = rooftop_many(seq[k:-1], cfg)
        step = dual_l2_distance(partial_prev, tails[k], cfg)
        margins.append(float(gaps[-1]) - step)
    limit = tails[-1]
    if any(is_minus_inf(t) for t in tails):
        raise ClassError("tail envelope degenerated inside the class")

    zero = reference_potential(cfg)
    halving = []
    for u in seq:
        w = shift(u, -float(np.max(u.u)))
        halving.append(0.5 * dual_l2_distance(zero, w, cfg)
                       - dual_l2_distance(zero, scale_relative(w, 0.5), cfg))

    dists = np.asarray([dual_l2_distance(u, limit, cfg) for u in seq])
    return CompletionResult(limit, gaps, dists,
                            np.asarray(margins), np.asarray(halving))
