"""Fixture library: the potentials the laboratory runs its checks on.

Closed-form profiles (round metric, normalized Green profiles and their
positive parts), soft and hard tents, power-tail potentials with declared
analytic continuations, and seeded random families for the property
suites.  Every constructor returns a validated potential; the scenario
runner resolves fixtures from JSON records through ``build_fixture``.

The normalized Green profile is ``phi(s) = s + 1``: its relative
potential integrates to zero against the round measure because
``int log(1 + e^{-s})`` against that measure is exactly 1 (the tests
confirm the closed form by quadrature).
"""

from __future__ import annotations

import numpy as np

from .core import (
    DEFAULT_CONFIG,
    DualPotential,
    ModelConfig,
    PowerTail,
    RadialPotential,
    cutoff,
    dual_of,
    make_potential,
    phi_fs,
    pointwise_max,
    primal_of,
)

__all__ = [
    "constant_potential",
    "fubini_study",
    "green_normalized",
    "green_mirror",
    "green_positive_part",
    "tent",
    "alpha_tail",
    "affine_mix",
    "dual_perturbation",
    "random_tent",
    "random_e2_potential",
    "random_e2_below_zero",
    "cauchy_sequence",
    "build_fixture",
    "FIXTURE_KINDS",
]


def fubini_study(cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """The zero relative potential."""
    return make_potential(phi_fs(cfg.grid.s), 0.0, 1.0, cfg)


def constant_potential(c: float, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    return make_potential(phi_fs(cfg.grid.s) + c, 0.0, 1.0, cfg)


def green_normalized(cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Green-type profile with its pole at s = -inf, normalized to mean 0."""
    return make_potential(cfg.grid.s + 1.0, 1.0, 1.0, cfg)


def green_mirror(cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Green-type profile with its pole at the opposite point."""
    return make_potential(np.ones(cfg.grid.N), 0.0, 0.0, cfg)


def green_positive_part(cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """max(g, 0): bounded, full mass, but with a curvature atom.

    The counterexample potential: its measure concentrates where it
    vanishes, which defeats both the partition formula and the endpoint
    path-energy formula.  The Green line's intercept is snapped (an
    O(grid-step) shift) so the crossing sits exactly on a grid node; the
    kink's atom then stays whole instead of leaking onto a neighbour node
    where the velocity no longer vanishes.
    """
    s = cfg.grid.s
    base = phi_fs(s)
    i = int(np.argmin(np.abs(s + np.log(np.e - 1.0))))
    c = float(base[i] - s[i])
    line = make_potential(s + c, 1.0, 1.0, cfg)
    return pointwise_max(line, fubini_study(cfg))


def tent(pieces, smoothing: float = 0.8, anchors=(0.0, 0.0),
         cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Piecewise-affine profile from (slope, intercept) pieces.

    ``smoothing > 0`` blends the pieces with a log-sum-exp of that
    temperature, which keeps the dual smooth (no curvature atoms, no flat
    primal stretches); ``smoothing = 0`` takes the hard maximum, whose
    kinks carry atoms.  Anchor pieces of slopes 0 and 1 (with the given
    intercepts) are always included so the profile has full mass and a
    bounded relative potential.
    """
    rows = [(0.0, float(anchors[0])), (1.0, float(anchors[1]))]
    for a, b in pieces:
        if not 0.0 <= a <= 1.0:
            raise ValueError("tent slopes must lie in [0, 1]")
        rows.append((float(a), float(b)))
    s = cfg.grid.s
    lines = np.stack([a * s + b for a, b in rows])
    if smoothing > 0.0:
        from scipy.special import logsumexp
        phi = smoothing * logsumexp(lines / smoothing, axis=0)
    else:
        phi = np.max(lines, axis=0)
    slopes = sorted(a for a, _ in rows)
    return make_potential(phi, slopes[0], slopes[-1], cfg)


def alpha_tail(alpha: float, coeff: float = 0.12,
               cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Potential decaying like -coeff * |s|^alpha toward the left pole.

    Full mass (zero Lelong data), but the weighted energies are finite
    only for small enough powers; the analytic tail annotation lets the
    energy detector see past the grid edge.
    """
    tail = PowerTail(alpha, coeff)
    s = cfg.grid.s
    phi = phi_fs(s) + tail.u(np.minimum(s, 0.0))
    return make_potential(phi, 0.0, 1.0, cfg, left_tail=tail)


def affine_mix(u0: RadialPotential, u1: RadialPotential, t: float,
               cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Pointwise affine combination (1-t) u0 + t u1 of the profiles."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("mixing parameter must lie in [0, 1]")
    phi = (1.0 - t) * u0.phi + t * u1.phi
    return make_potential(phi,
                          (1 - t) * u0.slope_left + t * u1.slope_left,
                          (1 - t) * u0.slope_right + t * u1.slope_right, cfg)


def dual_perturbation(u: RadialPotential, amplitude: float, center: float = 0.5,
                      cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Add a convex bump to the dual; distance from u scales with amplitude."""
    if amplitude < 0:
        raise ValueError("amplitude must be nonnegative")
    psi = dual_of(u, cfg)
    bump = (psi.xs - center) ** 2
    return primal_of(DualPotential(psi.values + amplitude * bump), cfg)


# ---------------------------------------------------------------------------
# Seeded families
# ---------------------------------------------------------------------------

def random_tent(rng: np.random.Generator, n_pieces: int = 3,
                cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Random smooth tent; the workhorse regular fixture."""
    slopes = np.sort(rng.uniform(0.15, 0.85, size=n_pieces))
    intercepts = rng.uniform(-2.0, 1.0, size=n_pieces)
    anchors = rng.uniform(-2.0, 0.5, size=2)
    smoothing = rng.uniform(0.6, 1.0)
    return tent(list(zip(slopes, intercepts)), smoothing=smoothing,
                anchors=tuple(anchors), cfg=cfg)


def random_e2_potential(rng: np.random.Generator,
                        cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Random finite-square-energy fixture: a tent, sometimes dragged
    toward a square-integrable power tail."""
    base = random_tent(rng, int(rng.integers(2, 5)), cfg)
    if rng.random() < 0.35:
        heavy = alpha_tail(float(rng.uniform(0.2, 0.3)),
                           float(rng.uniform(0.08, 0.15)), cfg)
        return affine_mix(base, heavy, float(rng.uniform(0.3, 0.7)), cfg)
    return base


def random_e2_below_zero(rng: np.random.Generator,
                         cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Random fixture with u <= 0, for the energy inequalities."""
    u = random_e2_potential(rng, cfg)
    lift = float(np.max(u.u))
    phi = u.phi - (lift + float(rng.uniform(0.0, 0.5)))
    return make_potential(phi, u.slope_left, u.slope_right, cfg,
                          left_tail=u.left_tail)


def cauchy_sequence(rng: np.random.Generator, length: int = 12,
                    cfg: ModelConfig = DEFAULT_CONFIG):
    """A summably-Cauchy sequence with a known direct limit.

    Geometrically shrinking convex bumps on the dual of a random tent;
    returns (members, direct_limit).
    """
    base = random_tent(rng, int(rng.integers(2, 4)), cfg)
    psi = dual_of(base, cfg)
    center = float(rng.uniform(0.2, 0.8))
    bump = (psi.xs - center) ** 2
    scale = float(rng.uniform(0.5, 2.0))
    members = [primal_of(DualPotential(psi.values + scale * 0.5 ** k * bump), cfg)
               for k in range(length)]
    return members, base


# ---------------------------------------------------------------------------
# JSON fixture records
# ---------------------------------------------------------------------------

def _build_cutoff(params, cfg):
    inner = build_fixture(params["of"], cfg)
    return cutoff(inner, float(params["h"]), cfg)


def _build_mix(params, cfg):
    u0 = build_fixture(params["first"], cfg)
    u1 = build_fixture(params["second"], cfg)
    return affine_mix(u0, u1, float(params.get("t", 0.5)), cfg)


def _build_random(params, cfg):
    rng = np.random.default_rng(int(params.get("seed", 0)))
    return random_e2_potential(rng, cfg)


FIXTURE_KINDS = {
    "constant": lambda p, cfg: constant_potential(float(p["c"]), cfg),
    "fubini_study": lambda p, cfg: fubini_study(cfg),
    "green_normalized": lambda p, cfg: green_normalized(cfg),
    "green_mirror": lambda p, cfg: green_mirror(cfg),
    "green_positive_part": lambda p, cfg: green_positive_part(cfg),
    "tent": lambda p, cfg: tent(
        [(float(a), float(b)) for a, b in p.get("pieces", [])],
        smoothing=float(p.get("smoothing", 0.8)),
        anchors=tuple(p.get("anchors", (0.0, 0.0))), cfg=cfg),
    "alpha_tail": lambda p, cfg: alpha_tail(
        float(p["alpha"]), float(p.get("coeff", 0.12)), cfg),
    "cutoff_of": _build_cutoff,
    "affine_mix_of": _build_mix,
    "random_e2": _build_random,
}


def build_fixture(record: dict, cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Resolve a JSON fixture record {"kind": ..., ...params}."""
    if not isinstance(record, dict) or "kind" not in record:
        raise ValueError("fixture record needs a 'kind' field")
    kind = record["kind"]
    if kind not in FIXTURE_KINDS:
        raise ValueError(f"unknown fixture kind {kind!r}; "
                         f"known: {sorted(FIXTURE_KINDS)}")
    return FIXTURE_KINDS[kind](record, cfg)
