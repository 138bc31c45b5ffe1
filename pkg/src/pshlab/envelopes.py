"""Upper envelopes: psh projection, rooftops, and partition diagnostics.

The projection ``P(b)`` of an obstacle is the largest admissible profile
below it; for two potentials the rooftop ``P(u0, u1) = P(min(u0, u1))``
is computed hull-free on the dual grid, where it is the pointwise maximum
of the two duals (the conjugate of a min is the max of the conjugates,
and a max of admissible duals is again admissible).

Failure is a value, not an exception: when the dual effective domains do
not meet, the rooftop is identically minus infinity, which is exactly the
degeneration the sphere exhibits for two Green-type potentials with poles
at opposite points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_CONFIG,
    ClassError,
    DualPotential,
    InvariantViolation,
    ModelConfig,
    RadialPotential,
    _hull_chain,
    dual_of,
    ma_measure,
    primal_of,
    shift,
)

__all__ = [
    "IDENTICALLY_MINUS_INF",
    "is_minus_inf",
    "project_psh",
    "rooftop",
    "rooftop_many",
    "SingularityEnvelope",
    "rooftop_singularity",
    "PartitionReport",
    "partition_residual",
    "partition_report_csv",
    "contact_tolerance",
]

# node masses at or above this are treated as curvature atoms (kinks);
# smooth fixtures on the default grid stay well below it
ATOM_THRESHOLD = 0.02

DEFAULT_C_SCHEDULE = tuple(float(2 ** k) for k in range(17))


class _MinusInfinity:
    """Marker for envelopes that degenerate to identically minus infinity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "IDENTICALLY_MINUS_INF"


IDENTICALLY_MINUS_INF = _MinusInfinity()


def is_minus_inf(obj) -> bool:
    return obj is IDENTICALLY_MINUS_INF


def contact_tolerance(*potentials: RadialPotential) -> float:
    scale = max(p.value_scale() for p in potentials)
    return 1e-7 * scale


# ---------------------------------------------------------------------------
# Projection onto admissible profiles
# ---------------------------------------------------------------------------

def project_psh(obstacle, tail_left: float, tail_right: float,
                cfg: ModelConfig = DEFAULT_CONFIG) -> RadialPotential:
    """Largest admissible profile below a sampled upper obstacle.

    The obstacle extends past the grid linearly with the given tail
    slopes.  The projection is the slope-constrained lower convex hull of
    the samples, exact at grid points: the unconstrained monotone-chain
    hull, then rays of the clamped extreme slopes attached at the first
    and last hull vertices compatible with the slope window.  Where the
    obstacle is already admissible and locally convex, nothing moves.
    """
    grid = cfg.grid
    b = np.asarray(obstacle, dtype=float)
    if b.shape != (grid.N,) or not np.all(np.isfinite(b)):
        raise ValueError("obstacle must supply a finite value at every grid point")
    if tail_left > 1.0 + 1e-12 or tail_right < -1e-12:
        raise InvariantViolation(
            "no admissible profile fits below an obstacle with tail slopes "
            f"({tail_left}, {tail_right})")
    lo = float(min(max(tail_left, 0.0), 1.0))
    hi = float(min(max(tail_right, 0.0), 1.0))
    if lo > hi + 1e-12:
        raise InvariantViolation("tail slope window is empty")

    s = grid.s
    vx, vy = _hull_chain(s, b)
    sig = np.diff(vy) / np.diff(vx) if len(vx) > 1 else np.empty(0)

    # first vertex whose outgoing slope already clears lo, and last vertex
    # whose incoming slope stays under hi; the monotone slope sequence
    # guarantees left pivot <= right pivot when lo <= hi
    a = int(np.searchsorted(sig, lo, side="left")) if len(sig) else 0
    over = np.flatnonzero(sig > hi)
    bdx = int(over[0]) if len(over) else len(vx) - 1

    phi = np.empty(grid.N)
    left = s <= vx[a]
    right = s >= vx[bdx]
    mid = ~(left | right)
    phi[left] = vy[a] + lo * (s[left] - vx[a])
    phi[right] = vy[bdx] + hi * (s[right] - vx[bdx])
    if mid.any():
        phi[mid] = np.interp(s[mid], vx, vy)
    return RadialPotential(grid, phi, lo, hi)


# ---------------------------------------------------------------------------
# Rooftop envelopes
# ---------------------------------------------------------------------------

def rooftop(u0: RadialPotential, u1: RadialPotential,
            cfg: ModelConfig = DEFAULT_CONFIG):
    """Rooftop envelope P(u0, u1), built on the dual grid.

    Returns the failure marker when the dual domains are disjoint.  The
    result lies below both inputs and carries its generating dual, so
    metric computations downstream see the pointwise maximum exactly.
    Comparable pairs short-circuit: the envelope of a nested pair is the
    smaller potential itself, returned unchanged.
    """
    if u0.grid == u1.grid:
        if np.all(u0.phi <= u1.phi) and u0.slope_left >= u1.slope_left \
                and u0.slope_right <= u1.slope_right:
            return u0
        if np.all(u1.phi <= u0.phi) and u1.slope_left >= u0.slope_left \
                and u1.slope_right <= u0.slope_right:
            return u1
    psi0 = dual_of(u0, cfg)
    psi1 = dual_of(u1, cfg)
    vals = np.maximum(psi0.values, psi1.values)
    if not np.isfinite(vals).any():
        return IDENTICALLY_MINUS_INF
    return primal_of(DualPotential(vals), cfg)


def rooftop_many(potentials, cfg: ModelConfig = DEFAULT_CONFIG):
    """Iterated rooftop P(u_1, ..., u_k): a running dual maximum.

    Associativity of the iteration is a tested invariant of the suite,
    not an assumption baked in anywhere else.
    """
    potentials = list(potentials)
    if not potentials:
        raise ValueError("need at least one potential")
    vals = dual_of(potentials[0], cfg).values.copy()
    for u in potentials[1:]:
        vals = np.maximum(vals, dual_of(u, cfg).values)
    if not np.isfinite(vals).any():
        return IDENTICALLY_MINUS_INF
    return primal_of(DualPotential(vals), cfg)


@dataclass(frozen=True)
class SingularityEnvelope:
    """Limit of P(u1 + c, u0) along a c-schedule, plus convergence data."""

    potential: object  # RadialPotential or IDENTICALLY_MINUS_INF
    converged: bool
    c_final: float

    def is_minus_inf(self) -> bool:
        return is_minus_inf(self.potential)


def rooftop_singularity(u0: RadialPotential, u1: RadialPotential,
                        c_schedule=None,
                        cfg: ModelConfig = DEFAULT_CONFIG) -> SingularityEnvelope:
    """Envelope of u0 with respect to the singularity type of u1.

    Computed as the increasing limit of ``rooftop(u1 + c, u0)`` along the
    schedule (powers of two up to 2^16 by default); declared converged
    when two successive iterates agree within 1e-9 on the common finite
    window.  In the dual picture the limit keeps psi0 on the effective
    domain of psi1 and is +inf outside, so a bounded u1 leaves u0 alone
    while a slope-atom u1 pins the result to its own singularity.
    """
    if c_schedule is None:
        c_schedule = DEFAULT_C_SCHEDULE
    c_schedule = sorted(float(c) for c in c_schedule)
    if not c_schedule:
        raise ValueError("c_schedule must be nonempty")
    psi0 = dual_of(u0, cfg)
    psi1 = dual_of(u1, cfg)
    if not (np.isfinite(psi0.values) & np.isfinite(psi1.values)).any():
        return SingularityEnvelope(IDENTICALLY_MINUS_INF, True, c_schedule[0])
    last = None
    converged = False
    c_used = c_schedule[-1]
    for c in c_schedule:
        vals = np.maximum(psi1.values - c, psi0.values)
        if last is not None:
            both = np.isfinite(vals) & np.isfinite(last)
            if both.any() and float(np.max(np.abs(vals[both] - last[both]))) <= 1e-9:
                converged = True
                c_used = c
                last = vals
                break
        last = vals
    return SingularityEnvelope(primal_of(DualPotential(last), cfg),
                               converged, c_used)


# ---------------------------------------------------------------------------
# Partition formula diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionReport:
    """Mass bookkeeping for the rooftop's Monge-Ampere partition.

    Totals are computed in the momentum picture for the continuous part
    (sub-cell resolution at dual crossings) and on the grid for curvature
    atoms, which belong to the closed contact set containing their node.
    ``excess`` is the signed amount by which the partition's right side
    overshoots the left; it vanishes for regular pairs and is strictly
    positive for the dimension-one counterexample.
    """

    lhs_mass: float
    mass_on_contact0: float
    mass_on_contact1: float        # restricted to contact1 \ contact0
    mass_on_contact1_full: float
    excess: float
    equality_residual: float
    one_sided_margin: float
    overlap_mass: float
    boundary_count: int
    contact0_nodes: np.ndarray
    contact1_nodes: np.ndarray
    lhs_cells: np.ndarray
    rhs0_cells: np.ndarray
    rhs1_cells: np.ndarray
    residual_cells: np.ndarray


def _closed_contact(gap: np.ndarray, tol: float) -> np.ndarray:
    """Nodes whose one-node neighborhood touches the contact set."""
    tight = gap <= tol
    closed = tight.copy()
    closed[:-1] |= tight[1:]
    closed[1:] |= tight[:-1]
    return closed


def _atom_mask(masses: np.ndarray) -> np.ndarray:
    return masses >= ATOM_THRESHOLD


def _split_measure(u: RadialPotential, side_x: np.ndarray,
                   closed_contact: np.ndarray, xs: np.ndarray,
                   window: tuple[int, int],
                   pole_contact: tuple[bool, bool]) -> float:
    """Mass of MA(u) on a contact set: continuous part by momentum
    measure, atoms by node membership, pole atoms by tail-line contact.

    ``side_x`` gives, per dual cell inside the common window, the
    fraction of the cell lying over the contact region (sub-cell
    resolved at crossings).  Each curvature atom's momentum footprint is
    removed from the continuous count and the atom is re-added iff its
    node lies in the closed contact set.
    """
    mu = ma_measure(u)
    atoms = _atom_mask(mu.node_masses)
    m = u.slopes()
    lo_slopes = np.concatenate(([u.slope_left], m))
    hi_slopes = np.concatenate((m, [u.slope_right]))
    ja, jb = window
    dx = xs[1] - xs[0]
    total = float(np.sum(side_x) * dx)
    for i in np.flatnonzero(atoms):
        a, b = lo_slopes[i], hi_slopes[i]
        if b > a:
            cells = np.clip((np.minimum(xs[ja + 1:jb + 1], b)
                             - np.maximum(xs[ja:jb], a)) / dx, 0.0, 1.0)
            total -= float(np.sum(np.minimum(cells, side_x)) * dx)
        if closed_contact[i]:
            total += float(mu.node_masses[i])
    if pole_contact[0]:
        total += mu.atom_neg
    if pole_contact[1]:
        total += mu.atom_pos
    return total


def partition_residual(u0: RadialPotential, u1: RadialPotential,
                       cfg: ModelConfig = DEFAULT_CONFIG,
                       tau_shift: float = 0.0) -> PartitionReport:
    """Check the Monge-Ampere partition of the rooftop against its parts.

    Requires the two dual effective domains to coincide (full-mass pairs,
    or matched Lelong data); mismatched domains leave continuous mass
    with no momentum coordinates to account it in.  ``tau_shift``
    replaces u1 by u1 + tau, the generic shift that empties the contact
    overlap; the report states the overlap mass rather than choosing a
    shift.
    """
    v1 = shift(u1, tau_shift) if tau_shift != 0.0 else u1
    roof = rooftop(u0, v1, cfg)
    if is_minus_inf(roof):
        raise ClassError("rooftop degenerated to -inf; no partition to report")

    psi0 = dual_of(u0, cfg)
    psi1 = dual_of(v1, cfg)
    if psi0.window != psi1.window:
        raise ClassError("partition diagnostics need matching dual domains")
    ja, jb = psi0.window
    xs = psi0.xs
    d = psi0.values[ja:jb + 1] - psi1.values[ja:jb + 1]

    # per dual cell, fraction sitting over {psi0 >= psi1}; crossings are
    # resolved linearly inside the cell
    dl, dr = d[:-1], d[1:]
    frac0 = np.where(dl >= 0, 1.0, 0.0)
    crossing = (dl >= 0) != (dr >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(crossing, dl / (dl - dr), frac0)
    frac0 = np.where(crossing & (dl >= 0), theta, frac0)
    frac0 = np.where(crossing & (dl < 0), 1.0 - theta, frac0)
    frac1 = 1.0 - frac0
    boundary_count = int(np.count_nonzero(crossing))

    tol = contact_tolerance(u0, v1, roof)
    gap0 = u0.phi - roof.phi
    gap1 = v1.phi - roof.phi
    contact0 = _closed_contact(gap0, tol)
    contact1 = _closed_contact(gap1, tol)

    # pole atoms belong to the side whose tail line the rooftop follows,
    # read off from the dual values at the window edges (ties to side 0)
    pole0 = (d[0] >= -tol, d[-1] >= -tol)
    pole1_excl = (d[0] < -tol, d[-1] < -tol)
    pole1_full = (d[0] <= tol, d[-1] <= tol)

    win = (ja, jb)
    mass0 = _split_measure(u0, frac0, contact0, xs, win, pole0)
    mass1_excl = _split_measure(v1, frac1, contact1 & ~contact0, xs, win,
                                pole1_excl)
    mass1_full = _split_measure(v1, frac1, contact1, xs, win, pole1_full)

    mu_roof = ma_measure(roof)
    mu0 = ma_measure(u0)
    mu1 = ma_measure(v1)
    lhs_total = mu_roof.total_mass
    rhs_total = mass0 + mass1_excl
    overlap = float(mu0.node_masses[contact0 & contact1].sum())

    rhs0_cells = np.where(contact0, mu0.node_masses, 0.0)
    rhs1_cells = np.where(contact1 & ~contact0, mu1.node_masses, 0.0)
    residual = mu_roof.node_masses - rhs0_cells - rhs1_cells

    return PartitionReport(
        lhs_mass=lhs_total,
        mass_on_contact0=mass0,
        mass_on_contact1=mass1_excl,
        mass_on_contact1_full=mass1_full,
        excess=rhs_total - lhs_total,
        equality_residual=abs(rhs_total - lhs_total),
        one_sided_margin=mass0 + mass1_full - lhs_total,
        overlap_mass=overlap,
        boundary_count=boundary_count,
        contact0_nodes=contact0,
        contact1_nodes=contact1,
        lhs_cells=mu_roof.node_masses,
        rhs0_cells=rhs0_cells,
        rhs1_cells=rhs1_cells,
        residual_cells=residual,
    )


def partition_report_csv(report: PartitionReport) -> str:
    """Render the per-cell partition bookkeeping as CSV text."""
    lines = ["cell,lhs,rhs0,rhs1,contact0,contact1"]
    for i in range(len(report.lhs_cells)):
        lines.append("%d,%.12g,%.12g,%.12g,%d,%d" % (
            i, report.lhs_cells[i], report.rhs0_cells[i], report.rhs1_cells[i],
            int(report.contact0_nodes[i]), int(report.contact1_nodes[i])))
    return "\n".join(lines) + "\n"
