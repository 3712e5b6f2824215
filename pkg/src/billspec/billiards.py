"""Exact billiard dynamics on the model domains.

All flows are closed-form (harmonic rotations, great circles, straight
lines); there is no ODE integration anywhere, so energy conservation and
return times are exact to rounding.  Grazing boundary hits are reported as
:class:`GlancingError` carrying the glancing margin, never silently
continued.

Boundary phase space charts:

* half-space kinds: a boundary point is (x', xi') with x', xi' the
  tangential position/momentum (empty in d = 1);
* hemisphere kinds (d = 2): a boundary point is (phi, xi_phi), the equator
  angle and the momentum component along the equator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import ModelSpec, PhaseState, ModelError, symbol_value
from .scattering import match_interface

GLANCE_TOL = 1e-8


class GlancingError(RuntimeError):
    """Boundary event within glancing tolerance; carries the margin value."""

    def __init__(self, msg, rho=None):
        super().__init__(msg)
        self.rho = rho


class BoundaryCrossedError(RuntimeError):
    """Requested flow time crosses the boundary."""


class FlowEscapeError(RuntimeError):
    """Trajectory never returns to the boundary (non-periodic free motion)."""


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of the boundary phase space together with the energy level."""

    x_perp: tuple
    xi_perp: tuple
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "x_perp", tuple(float(v) for v in np.atleast_1d(self.x_perp)))
        object.__setattr__(self, "xi_perp", tuple(float(v) for v in np.atleast_1d(self.xi_perp)))


@dataclass(frozen=True)
class BilliardLeg:
    side: int
    start: PhaseState
    end: PhaseState
    t_leg: float
    action: float
    maslov: int


@dataclass(frozen=True)
class BranchEvent:
    at: BoundaryPoint
    mode: str  # both_hyperbolic | internal_elliptic | glancing
    reflected: PhaseState
    refracted: PhaseState | None = None


@dataclass(frozen=True)
class BilliardPath:
    legs: tuple
    events: tuple
    word: tuple
    amplitude: float = 1.0  # cumulative scattering amplitude modulus
    flux: float = 1.0       # cumulative flux fraction (weighted |amp|^2)
    truncated: bool = False


# -- elementary flow -------------------------------------------------------


def _rotation_flow(x, xi, s):
    c, sn = math.cos(s), math.sin(s)
    return c * x + sn * xi, -sn * x + c * xi


def _hemisphere_flow(x, xi, s):
    # ambient great-circle flow at arc parameter s
    speed = np.linalg.norm(xi)
    u = xi / speed
    c, sn = math.cos(s), math.sin(s)
    return c * x + sn * u, speed * (c * u - sn * x)


def flow(model: ModelSpec, s: PhaseState, t: float) -> PhaseState:
    """Hamiltonian flow of the side's symbol for time t, staying interior."""
    m = model.medium(s.side)
    x, xi = s.x_arr, s.xi_arr
    if model.kind in ("half_space_oscillator", "glued_half_lines_oscillator"):
        arc = m.omega**2 * t
        hit = _oscillator_first_zero(x[0], xi[0])
        if hit is not None and hit < arc - 1e-13:
            raise BoundaryCrossedError(f"boundary reached at arc {hit} < {arc}")
        xn, xin = _rotation_flow(x, xi, arc)
        return PhaseState(s.side, xn, xin)
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        speed = np.linalg.norm(xi)
        arc = 2.0 * m.omega**2 * speed * t
        u1 = xi[0] / speed
        hit = _oscillator_first_zero(x[0], u1)
        if hit is not None and hit < arc - 1e-13:
            raise BoundaryCrossedError(f"equator reached at arc {hit} < {arc}")
        xn, xin = _hemisphere_flow(x, xi, arc)
        return PhaseState(s.side, xn, xin)
    # free straight-line motion
    xn = x + 2.0 * m.c**2 * t * xi
    if xn[0] < -1e-13 or (x[0] > 0 and xn[0] < 0):
        raise BoundaryCrossedError("interface crossed before time t")
    return PhaseState(s.side, xn, xi)


def _oscillator_first_zero(a, b):
    """Smallest s > 0 with a cos s + b sin s = 0; None if identically zero."""
    r = math.hypot(a, b)
    if r == 0.0:
        return None
    delta = math.atan2(a, b)  # a cos s + b sin s = r sin(s + delta)
    s0 = -delta % math.pi
    if s0 < 1e-12:  # starting on the boundary: next zero half a turn later
        s0 += math.pi
    return s0


def _oscillator_leg_action(x, xi, s_arc):
    """int xi . dx along the rotation leg of arc length s_arc (unit angular speed)."""
    xx = float(x @ x)
    pp = float(xi @ xi)
    xp = float(x @ xi)
    return (
        pp * (s_arc / 2.0 + math.sin(2 * s_arc) / 4.0)
        + xx * (s_arc / 2.0 - math.sin(2 * s_arc) / 4.0)
        - xp * math.sin(s_arc) ** 2
    )


def _count_normal_turnings(a, b, s_arc):
    """Zeros of the normal momentum -a sin s + b cos s on (0, s_arc)."""
    if a == 0.0 and b == 0.0:
        return 0
    first = math.atan2(b, a) % math.pi
    if first < 1e-12:
        first += math.pi
    count = 0
    s = first
    while s < s_arc - 1e-12:
        count += 1
        s += math.pi
    return count


def glancing_margin(model: ModelSpec, s: PhaseState) -> float:
    """Distance-to-glancing diagnostic x_1 + |{a, x_1}|."""
    m = model.medium(s.side)
    if model.kind in ("half_space_oscillator", "glued_half_lines_oscillator"):
        return s.x[0] + abs(m.omega**2 * s.xi[0])
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        return s.x[0] + abs(2.0 * m.omega**2 * s.xi[0])
    return s.x[0] + abs(2.0 * m.c**2 * s.xi[0])


def normal_speed(model: ModelSpec, s: PhaseState) -> float:
    """{a, x_1} = dx_1/dt at the state (sign: > 0 moving away from boundary)."""
    m = model.medium(s.side)
    if model.kind in ("half_space_oscillator", "glued_half_lines_oscillator"):
        return m.omega**2 * s.xi[0]
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        return 2.0 * m.omega**2 * s.xi[0]
    return 2.0 * m.c**2 * s.xi[0]


def next_boundary_hit(model: ModelSpec, s: PhaseState, glance_tol: float = GLANCE_TOL):
    """Flow to the next boundary hit; returns (BoundaryPoint, t_hit, BilliardLeg)."""
    m = model.medium(s.side)
    x, xi = s.x_arr, s.xi_arr
    tau = symbol_value(model, s)
    if model.kind in ("half_space_oscillator", "glued_half_lines_oscillator"):
        arc = _oscillator_first_zero(x[0], xi[0])
        if arc is None:
            raise GlancingError("normal motion identically on the boundary", rho=0.0)
        t_hit = arc / m.omega**2
        xe, xie = _rotation_flow(x, xi, arc)
        end = PhaseState(s.side, xe, xie)
        if abs(normal_speed(model, end)) < glance_tol:
            raise GlancingError("glancing boundary hit", rho=glancing_margin(model, end))
        action = _oscillator_leg_action(x, xi, arc)
        maslov = _count_normal_turnings(x[0], xi[0], arc)
        bp = BoundaryPoint(xe[1:], xie[1:], tau)
        return bp, t_hit, BilliardLeg(s.side, s, end, t_hit, action, maslov)
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        speed = np.linalg.norm(xi)
        if speed == 0.0:
            raise GlancingError("zero momentum", rho=glancing_margin(model, s))
        u = xi / speed
        arc = _oscillator_first_zero(x[0], u[0])
        if arc is None:
            raise GlancingError("equatorial orbit", rho=0.0)
        t_hit = arc / (2.0 * m.omega**2 * speed)
        xe, xie = _hemisphere_flow(x, xi, arc)
        end = PhaseState(s.side, xe, xie)
        if abs(normal_speed(model, end)) < glance_tol:
            raise GlancingError("glancing equator hit", rho=glancing_margin(model, end))
        action = speed * arc
        # conjugate points of the great-circle flow sit at arc multiples of pi;
        # the equator-to-equator leg carries its conjugate point at arrival
        maslov = int(math.floor(arc / math.pi + 1e-12))
        bp = _hemisphere_chart(xe, xie, tau)
        return bp, t_hit, BilliardLeg(s.side, s, end, t_hit, action, maslov)
    # free flow
    v = 2.0 * m.c**2 * xi[0]
    if v >= -1e-15:
        if abs(v) < glance_tol:
            raise GlancingError("glancing launch", rho=glancing_margin(model, s))
        raise FlowEscapeError("free trajectory never returns to the interface")
    t_hit = -x[0] / v
    xe = x + 2.0 * m.c**2 * t_hit * xi
    end = PhaseState(s.side, xe, xi)
    action = 2.0 * m.c**2 * t_hit * float(xi @ xi)
    bp = BoundaryPoint(xe[1:], xi[1:], tau)
    return bp, t_hit, BilliardLeg(s.side, s, end, t_hit, action, 0)


def _hemisphere_chart(x, xi, tau):
    """Equator chart (phi, xi_phi) of an ambient boundary state (d = 2 only)."""
    if len(x) != 3:
        raise ModelError("hemisphere boundary chart implemented for d = 2")
    phi = math.atan2(x[2], x[1])
    e_phi = np.array([0.0, -x[2], x[1]])
    return BoundaryPoint((phi,), (float(xi @ e_phi),), tau)


def reflect(model: ModelSpec, s: PhaseState, glance_tol: float = GLANCE_TOL) -> PhaseState:
    """Specular reflection at the boundary: flip the normal momentum."""
    if abs(normal_speed(model, s)) < glance_tol:
        raise GlancingError("cannot reflect a glancing state", rho=glancing_margin(model, s))
    if normal_speed(model, s) > 0:
        raise ModelError("reflect expects an incoming state")
    xi = np.array(s.xi)
    xi[0] = -xi[0]
    return PhaseState(s.side, s.x, xi)


def _interface_data(model: ModelSpec, bp: BoundaryPoint):
    """Per-side normal momentum squared at a boundary point and energy tau."""
    out = []
    for side in (1, 2):
        m = model.medium(side)
        xp = np.asarray(bp.x_perp)
        xip = np.asarray(bp.xi_perp)
        if model.kind == "glued_half_lines_oscillator":
            k2 = 2.0 * bp.tau / m.omega**2 + m.E
        elif model.kind == "glued_half_spaces_free":
            k2 = bp.tau / m.c**2 - float(xip @ xip)
        elif model.kind == "glued_hemispheres":
            k2 = bp.tau / m.omega**2 + m.E - float(xip @ xip)
        elif model.kind == "half_space_oscillator":
            k2 = 2.0 * bp.tau / m.omega**2 + m.E - float(xip @ xip) - float(xp @ xp)
        elif model.kind == "hemisphere_laplacian":
            k2 = bp.tau / m.omega**2 + m.E - float(xip @ xip)
        else:
            raise ModelError(model.kind)
        out.append(k2)
        if model.n_sides == 1:
            return (k2,)
    return tuple(out)


def lift(model: ModelSpec, bp: BoundaryPoint, side: int,
         glance_tol: float = GLANCE_TOL) -> PhaseState:
    """Lift a boundary point to the outgoing state ({a, x_1} > 0) on a side."""
    k2 = _interface_data(model, bp)[side - 1]
    if k2 < glance_tol**2:
        raise GlancingError(f"no transversal lift on side {side}", rho=max(k2, 0.0))
    k = math.sqrt(k2)
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        phi = bp.x_perp[0]
        p = np.array([0.0, math.cos(phi), math.sin(phi)])
        e_phi = np.array([0.0, -math.sin(phi), math.cos(phi)])
        n_hat = np.array([1.0, 0.0, 0.0])
        xi = bp.xi_perp[0] * e_phi + k * n_hat
        return PhaseState(side, p, xi)
    x = np.concatenate(([0.0], bp.x_perp))
    xi = np.concatenate(([k], bp.xi_perp))
    return PhaseState(side, x, xi)


def refract(model: ModelSpec, s: PhaseState, glance_tol: float = GLANCE_TOL):
    """Refracted continuation on the other side, or None under total internal
    reflection (the far side elliptic)."""
    if model.n_sides == 1:
        raise ModelError("refraction needs a glued model")
    other = 3 - s.side
    tau = symbol_value(model, s)
    bp = _boundary_chart(model, s, tau)
    k2 = _interface_data(model, bp)[other - 1]
    if abs(k2) < glance_tol**2:
        raise GlancingError(f"glancing on side {other}", rho=abs(k2))
    if k2 < 0:
        return None
    return lift(model, bp, other, glance_tol)


def _boundary_chart(model: ModelSpec, s: PhaseState, tau: float) -> BoundaryPoint:
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        return _hemisphere_chart(s.x_arr, s.xi_arr, tau)
    return BoundaryPoint(s.x[1:], s.xi[1:], tau)


def antipodal_map(model: ModelSpec, bp: BoundaryPoint) -> BoundaryPoint:
    """Model's antipodal involution of the boundary phase space."""
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        phi = (bp.x_perp[0] + math.pi) % (2 * math.pi)
        return BoundaryPoint((phi,), bp.xi_perp, bp.tau)
    return BoundaryPoint(
        tuple(-v for v in bp.x_perp), tuple(-v for v in bp.xi_perp), bp.tau
    )


def boundary_map(model: ModelSpec, side: int, bp: BoundaryPoint,
                 glance_tol: float = GLANCE_TOL) -> BoundaryPoint:
    """Lift to the side, flow to the next boundary hit, project back."""
    s = lift(model, bp, side, glance_tol)
    out, _, _ = next_boundary_hit(model, s, glance_tol)
    return out


def boundary_distance(model: ModelSpec, a: BoundaryPoint, b: BoundaryPoint) -> float:
    """Chart distance on the boundary phase space (angles mod 2 pi)."""
    if model.kind in ("hemisphere_laplacian", "glued_hemispheres"):
        dphi = (a.x_perp[0] - b.x_perp[0] + math.pi) % (2 * math.pi) - math.pi
        return math.hypot(dphi, a.xi_perp[0] - b.xi_perp[0])
    dx = np.asarray(a.x_perp) - np.asarray(b.x_perp)
    dxi = np.asarray(a.xi_perp) - np.asarray(b.xi_perp)
    return float(np.sqrt(dx @ dx + dxi @ dxi))


def check_commutation(model: ModelSpec, bp: BoundaryPoint,
                      glance_tol: float = GLANCE_TOL) -> float:
    """Distance between Phi_1 Phi_2 (z) and Phi_2 Phi_1 (z)."""
    if model.n_sides == 1:
        raise ModelError("commutation needs two sides")
    p12 = boundary_map(model, 1, boundary_map(model, 2, bp, glance_tol), glance_tol)
    p21 = boundary_map(model, 2, boundary_map(model, 1, bp, glance_tol), glance_tol)
    return boundary_distance(model, p12, p21)


def detect_period(model: ModelSpec, start: PhaseState, t_max: float, tol: float = 1e-9,
                  glance_tol: float = GLANCE_TOL):
    """Smallest return time of the reflected (non-branching) billiard.

    Interior starts are anchored at the orbit's previous boundary hit (found
    by time reversal), where returns coincide with reflection events.
    Returns (T0, n_reflections) or None if no return occurs before t_max.
    """
    if t_max <= 0:
        raise ModelError("t_max must be > 0")
    anchor = start
    if start.x[0] > glance_tol:
        try:
            _, _, back_leg = next_boundary_hit(model, reverse(start), glance_tol)
        except FlowEscapeError:
            return None
        anchor = reverse(back_leg.end)
    s = anchor
    t_acc = 0.0
    n_ref = 0
    x0, xi0 = anchor.x_arr, anchor.xi_arr
    for _ in range(10000):
        try:
            _, t_hit, leg = next_boundary_hit(model, s, glance_tol)
        except FlowEscapeError:
            return None
        t_acc += t_hit
        if t_acc > t_max:
            return None
        s = reflect(model, leg.end, glance_tol)
        n_ref += 1
        if (np.linalg.norm(s.x_arr - x0) + np.linalg.norm(s.xi_arr - xi0)) < tol:
            return t_acc, n_ref
    return None


def trace_branching(model: ModelSpec, start: BoundaryPoint, depth: int,
                    amplitude_floor: float = 0.0, glance_tol: float = GLANCE_TOL):
    """Enumerate branch words up to the given depth with flux bookkeeping.

    The tree starts one branch on every hyperbolic side of the initial
    boundary point; each subsequent hit splits into the reflected
    continuation and, when the far side is hyperbolic, the refracted one.
    Branches whose cumulative amplitude falls below ``amplitude_floor`` are
    recorded as truncated, as are branches reaching a glancing
    configuration.  Flux is normalised per starting side: the flux
    fractions of each starting side's leaves plus truncations sum to one.
    """
    if depth < 1:
        raise ModelError("depth must be >= 1")
    if model.n_sides == 1:
        raise ModelError("branching tree needs a glued model")

    paths = []
    # stack entries: (state outgoing on side, legs, events, word, amp, flux)
    stack = []
    k2s = _interface_data(model, start)
    for side, k2 in zip((1, 2), k2s):
        if abs(k2) < glance_tol**2:
            raise GlancingError("glancing launch side", rho=abs(k2))
        if k2 > 0:
            stack.append((lift(model, start, side, glance_tol),
                          (), (), (), 1.0, 1.0))
    while stack:
        s, legs, events, word, amp, flux = stack.pop()
        try:
            bp, _, leg = next_boundary_hit(model, s, glance_tol)
        except (GlancingError, FlowEscapeError):
            paths.append(BilliardPath(legs, events, word, amp, flux, truncated=True))
            continue
        legs = legs + (leg,)
        word = word + (s.side,)
        if len(word) >= depth:
            kap, _ = _event_matrix(model, bp, glance_tol)
            mode = "both_hyperbolic" if kap is not None and kap[1] is not None else "internal_elliptic"
            try:
                refl = reflect(model, leg.end, glance_tol)
            except GlancingError:
                paths.append(BilliardPath(legs, events, word, amp, flux, truncated=True))
                continue
            refr = refract(model, leg.end, glance_tol) if mode == "both_hyperbolic" else None
            events = events + (BranchEvent(bp, mode, refl, refr),)
            paths.append(BilliardPath(legs, events, word, amp, flux))
            continue
        try:
            children, mode = _branch_children(model, bp, leg, glance_tol)
        except GlancingError:
            paths.append(BilliardPath(legs, events, word, amp, flux, truncated=True))
            continue
        refl_state = children[0][0]
        refr_state = children[1][0] if len(children) > 1 else None
        events = events + (BranchEvent(bp, mode, refl_state, refr_state),)
        for child, c_amp, c_flux in children:
            new_amp = amp * c_amp
            new_flux = flux * c_flux
            if new_amp + 1e-12 < amplitude_floor:
                paths.append(
                    BilliardPath(legs, events, word, new_amp, new_flux, truncated=True)
                )
            else:
                stack.append((child, legs, events, word, new_amp, new_flux))
    return paths


def _event_matrix(model: ModelSpec, bp: BoundaryPoint, glance_tol):
    """(kappa column for the incident side, weights) at a boundary point."""
    k2s = _interface_data(model, bp)
    for k2 in k2s:
        if abs(k2) < glance_tol**2:
            raise GlancingError("glancing interface data", rho=abs(k2))
    g1, g2 = model.gamma(1), model.gamma(2)
    roots = [math.sqrt(k2) if k2 > 0 else -1j * math.sqrt(-k2) for k2 in k2s]
    kap, weights = match_interface(g1, g2, roots[0], roots[1],
                                   model.bc.alpha, model.bc.beta)
    both = all(k2 > 0 for k2 in k2s)
    return (kap, roots[1] if both else None), weights


def _branch_children(model: ModelSpec, bp: BoundaryPoint, leg: BilliardLeg, glance_tol):
    (kap, _), weights = _event_matrix(model, bp, glance_tol)
    j = leg.side
    refl = reflect(model, leg.end, glance_tol)
    refr = refract(model, leg.end, glance_tol)
    mode = "both_hyperbolic" if refr is not None else "internal_elliptic"
    r_amp = abs(kap[j - 1, j - 1])
    children = [(refl, r_amp, r_amp**2)]
    if refr is not None:
        k = refr.side
        t_amp = abs(kap[k - 1, j - 1])
        children.append((refr, t_amp, t_amp**2 * weights[k - 1] / weights[j - 1]))
    return children, mode


def reverse(s: PhaseState) -> PhaseState:
    """Time reversal: flip the momentum."""
    return PhaseState(s.side, s.x, tuple(-v for v in s.xi))


def dump_paths_jsonl(paths, fh):
    """One BilliardPath per line: word, times, actions, boundary points."""
    for p in paths:
        rec = {
            "word": list(p.word),
            "times": [leg.t_leg for leg in p.legs],
            "actions": [leg.action for leg in p.legs],
            "maslov": [leg.maslov for leg in p.legs],
            "amplitude": p.amplitude,
            "flux": p.flux,
            "truncated": p.truncated,
            "events": [
                {"x_perp": list(e.at.x_perp), "xi_perp": list(e.at.xi_perp),
                 "tau": e.at.tau, "mode": e.mode}
                for e in p.events
            ],
        }
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
