"""Boundary monodromy, secular matrices, eigenvalue clusters, corrections.

A closed two-legged billiard through a boundary point z and its antipode
rho(z) is encoded by the flux-unitary matrix

    M(z, tau) = kappa(z) M'(z) kappa(rho z) M'(rho z),

with M'(.) the diagonal of per-leg phase factors.  Roots of det(S - 1) with
S the matrix of M dressed by the per-side spectral phase factors locate the
eigenvalue clusters.

Phase orientation.  All phases follow the wave convention of
:mod:`billspec.scattering` (incident e^{+ikx}): the per-leg phase is
``(tau * t_leg - action)/h + maslov * pi/2`` and the spectral dressing is
``e^{-i (lam/t_ref + tau/h) T_j}``.  In this orientation eigenphases of the
secular matrix decrease as tau grows while the counting function increases,
so the counting correction applies the sawtooth to the reversed eigenphases.
The orientation is pinned end to end by the exact one-dimensional spectra
(see tests); flags expose the mirrored alternative where meaningful.

For the one-dimensional glued model the antipodal map is the identity and
the two-legged matrix is the square of the primitive one-hit transfer; the
square's extra sign branch predicts twice too many roots, so the predictors
for that model use the primitive transfer (validated against the exact
spectrum).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import billiards as bl
from .kernels import sawtooth
from .models import ModelSpec, ModelError, spectral_parameter_shift
from .scattering import match_interface


class MonodromyError(RuntimeError):
    pass


@dataclass(frozen=True)
class MonodromyData:
    """Two-leg monodromy at a boundary point: matrix, phases, periods, weights."""

    z: bl.BoundaryPoint
    M: np.ndarray
    kappa: np.ndarray          # scattering block at z
    leg_phases: tuple          # ((l_11, l_21), (l_12, l_22)): [leg nu][side j]
    periods: tuple             # (T_1, T_2): per-side time around the closed orbit
    weights: tuple             # flux weights (w_1, w_2)
    tau: float
    h: float

    def unitarity_residual(self) -> float:
        W = np.diag(self.weights)
        return float(np.max(np.abs(self.M.conj().T @ W @ self.M - W)))


@dataclass(frozen=True)
class ClusterPrediction:
    roots: tuple
    multiplicities: tuple
    angles: dict               # phi, psi, chi, mix at the window centre
    window: tuple
    h: float
    root_residuals: tuple


@dataclass(frozen=True)
class CorrectionTerm:
    value: float
    grid_size: int
    quadrature_error: float
    flagged_points: int


# -- leg phases -------------------------------------------------------------


def leg_phase(leg: bl.BilliardLeg, tau: float, h: float, orientation: str = "counting") -> float:
    """Reduced phase of one billiard leg.

    ``counting`` (default): (tau * t - action)/h + maslov * pi/2, the
    orientation consistent with the stated Robin/transmission reflection
    phases.  ``reversed`` negates it (the mirrored convention).
    """
    val = (tau * leg.t_leg - leg.action) / h + leg.maslov * math.pi / 2.0
    if orientation == "reversed":
        return -val
    if orientation != "counting":
        raise MonodromyError(f"unknown orientation {orientation!r}")
    return val


# -- monodromy assembly ------------------------------------------------------


def _side_leg(model: ModelSpec, z: bl.BoundaryPoint, side: int, glance_tol):
    state = bl.lift(model, z, side, glance_tol)
    _, _, leg = bl.next_boundary_hit(model, state, glance_tol)
    return leg


def _kappa_at(model: ModelSpec, z: bl.BoundaryPoint, glance_tol):
    k2s = bl._interface_data(model, z)
    for k2 in k2s:
        if abs(k2) < glance_tol**2:
            raise bl.GlancingError("glancing interface data", rho=abs(k2))
    roots = [math.sqrt(k2) if k2 > 0 else -1j * math.sqrt(-k2) for k2 in k2s]
    return match_interface(model.gamma(1), model.gamma(2), roots[0], roots[1],
                           model.bc.alpha, model.bc.beta)


def monodromy_matrix(model: ModelSpec, z: bl.BoundaryPoint, tau: float, h: float,
                     glance_tol: float = bl.GLANCE_TOL) -> MonodromyData:
    """Assemble the two-leg monodromy M = kappa(z) M'(z) kappa(rho z) M'(rho z)."""
    if model.n_sides != 2:
        raise ModelError("monodromy matrix needs a glued model")
    z = replace(z, tau=tau)
    rz = bl.antipodal_map(model, z)
    kap_z, weights = _kappa_at(model, z, glance_tol)
    kap_rz, _ = _kappa_at(model, rz, glance_tol)
    legs_z = [_side_leg(model, z, side, glance_tol) for side in (1, 2)]
    legs_rz = [_side_leg(model, rz, side, glance_tol) for side in (1, 2)]
    ph_z = tuple(leg_phase(l, tau, h) for l in legs_z)
    ph_rz = tuple(leg_phase(l, tau, h) for l in legs_rz)
    Mp_z = np.diag(np.exp(1j * np.array(ph_z)))
    Mp_rz = np.diag(np.exp(1j * np.array(ph_rz)))
    M = kap_z @ Mp_z @ kap_rz @ Mp_rz
    periods = tuple(legs_z[j].t_leg + legs_rz[j].t_leg for j in range(2))
    return MonodromyData(z, M, kap_z, (ph_z, ph_rz), periods, weights, tau, h)


def secular_matrix(mono: MonodromyData, lam: float, tau: float, h: float,
                   t_ref: float | None = None) -> np.ndarray:
    """Spectral dressing S_jk = e^{-i (lam/t_ref + tau/h) T_j} m_jk."""
    T1, T2 = mono.periods
    if min(T1, T2) <= 0:
        raise MonodromyError("periods must be positive")
    if t_ref is None:
        t_ref = T1 + T2
    phases = np.exp(-1j * (lam / t_ref + tau / h) * np.array([T1, T2]))
    return phases[:, None] * mono.M


def _w_unitarize(M: np.ndarray, weights) -> np.ndarray:
    w = np.sqrt(np.asarray(weights, dtype=float))
    if np.any(w <= 0):
        raise MonodromyError("flux weights must be positive to unitarize")
    return (w[:, None] * M) / w[None, :]


def secular_eigenphases(M: np.ndarray, weights) -> np.ndarray:
    """Eigenphases of a flux-unitary matrix, in (-pi, pi]."""
    ev = np.linalg.eigvals(_w_unitarize(M, weights))
    return np.angle(ev)


def scattering_eigenphases(mono: MonodromyData, tol: float = 1e-8):
    """Eigenphase pair (e^{i phi}, e^{-i phi}) of the scattering block.

    Uses phi = arccos(kappa_11) when the block has the antisymmetric
    structure kappa_22 = -kappa_11 with real diagonal; otherwise falls back
    to a general eigensolve of the block.
    """
    kap = mono.kappa
    diag_ok = (abs(kap[0, 0] + kap[1, 1]) <= tol
               and abs(kap[0, 0].imag) <= tol)
    if diag_ok:
        phi = math.acos(min(1.0, max(-1.0, kap[0, 0].real)))
        return cmath.exp(1j * phi), cmath.exp(-1j * phi)
    ev = np.linalg.eigvals(_w_unitarize(kap, mono.weights))
    return complex(ev[0]), complex(ev[1])


# -- general unitary parametrisation and the cluster equation ----------------


def unitary_angles(M: np.ndarray, weights=None, tol: float = 1e-8) -> dict:
    """Angles (phi, psi, chi, mix) of a flux-unitary 2x2 matrix.

    M-hat = e^{i phi} [[e^{i psi} cos mix, e^{i chi} sin mix],
                       [-e^{-i chi} sin mix, e^{-i psi} cos mix]]
    after conjugating by the flux weights.  Raises when M is not unitary in
    the weighted norm.
    """
    Mh = _w_unitarize(M, weights) if weights is not None else np.asarray(M, dtype=complex)
    det = Mh[0, 0] * Mh[1, 1] - Mh[0, 1] * Mh[1, 0]
    if abs(abs(det) - 1.0) > 100 * tol:
        raise MonodromyError(f"matrix is not unitary: |det| = {abs(det)}")
    phi = 0.5 * cmath.phase(det)
    a = Mh[0, 0] * cmath.exp(-1j * phi)
    b = Mh[0, 1] * cmath.exp(-1j * phi)
    mix = math.atan2(min(1.0, abs(b)), min(1.0, abs(a)))
    psi = cmath.phase(a) if abs(a) > tol else 0.0
    chi = cmath.phase(b) if abs(b) > tol else 0.0
    rebuilt = cmath.exp(1j * phi) * np.array(
        [[cmath.exp(1j * psi) * math.cos(mix), cmath.exp(1j * chi) * math.sin(mix)],
         [-cmath.exp(-1j * chi) * math.sin(mix), cmath.exp(-1j * psi) * math.cos(mix)]]
    )
    resid = float(np.max(np.abs(rebuilt - Mh)))
    if resid > 1e-6:
        raise MonodromyError(f"unitary parametrisation failed, residual {resid}")
    return {"phi": phi, "psi": psi, "chi": chi, "mix": mix, "residual": resid}


def cluster_equation(angles: dict, theta_plus, theta_minus):
    """cos(-phi + theta_plus) - cos(mix) * cos(-psi + theta_minus)."""
    return (np.cos(-angles["phi"] + theta_plus)
            - math.cos(angles["mix"]) * np.cos(-angles["psi"] + theta_minus))


def _bracket_roots(f, lo, hi, step):
    xs = np.arange(lo, hi + step, step)
    if xs[-1] < hi:
        xs = np.append(xs, hi)
    vals = np.array([f(x) for x in xs])
    roots = []
    for i in range(len(xs) - 1):
        if vals[i] == 0.0:
            roots.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(brentq(f, xs[i], xs[i + 1], xtol=1e-14)))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def cluster_roots(mono: MonodromyData, h: float, window, root_tol: float = 1e-12,
                  points_per_spacing: int = 8) -> ClusterPrediction:
    """Roots of the frozen-matrix cluster equation on a window.

    The matrix angles are extracted once from ``mono.M`` and the explicit
    per-side phase factors carry the tau dependence:
    cos(-phi + tau (T1+T2)/(2h)) = cos(mix) cos(-psi + tau (T1-T2)/(2h)).
    """
    lo, hi = window
    T1, T2 = mono.periods
    if T1 + T2 <= 0:
        raise MonodromyError("periods must be positive")
    angles = unitary_angles(mono.M, mono.weights)

    def f(tau):
        return float(cluster_equation(angles, 0.5 * tau * (T1 + T2) / h,
                                      0.5 * tau * (T1 - T2) / h))

    spacing = 2.0 * math.pi * h / (T1 + T2)
    roots = _bracket_roots(f, lo, hi, spacing / points_per_spacing)
    residuals = tuple(abs(f(r)) for r in roots)
    if any(r > root_tol * 10 for r in residuals):
        # brentq met xtol before f-tolerance; refine once with tighter steps
        roots = [brentq(f, r - spacing / 50, r + spacing / 50, xtol=1e-15)
                 if res > root_tol else r for r, res in zip(roots, residuals)]
        residuals = tuple(abs(f(r)) for r in roots)
    mult = tuple(1 for _ in roots)
    return ClusterPrediction(tuple(roots), mult, angles, (lo, hi), h, residuals)


def unit_eigenvalue_fraction(matrices, weights_list, periods, h: float,
                             tau_center: float, T_list, eig_tol: float = 1e-3,
                             eps: float = 1.0, n_tau: int = 41):
    """Fraction of grid matrices with eigenvalue 1 in a shrinking tau-window.

    For each reference time T in ``T_list`` the window is
    [tau_center - eps h / T, tau_center + eps h / T]; a grid point counts
    when some eigenvalue of the dressed matrix comes within ``eig_tol`` of 1
    somewhere in the window.
    """
    out = {}
    periods = np.asarray(periods, dtype=float)
    for T in T_list:
        half = eps * h / T
        taus = np.linspace(tau_center - half, tau_center + half, n_tau)
        hits = 0
        for M, w in zip(matrices, weights_list):
            Mh = _w_unitarize(M, w)
            found = False
            for tau in taus:
                phases = np.exp(-1j * tau * periods / h)
                ev = np.linalg.eigvals(phases[:, None] * Mh)
                if np.min(np.abs(ev - 1.0)) < eig_tol:
                    found = True
                    break
            hits += found
        out[T] = hits / len(matrices)
    return out


# -- counting correction ------------------------------------------------------


def counting_correction_from_phases(eigenphase_sets, grid_weights, d: int,
                                    section_weight: float = 1.0,
                                    branch_tol: float = 1e-9) -> CorrectionTerm:
    """Integrate the sawtooth of reversed eigenphases over a boundary grid.

    ``eigenphase_sets`` is an iterable of per-point eigenphase arrays;
    ``grid_weights`` the quadrature weights on the boundary phase space.
    ``section_weight`` divides out multiple section crossings per primitive
    orbit (1 when the antipodal map is the identity, 1/2 for a genuine
    two-point orbit).  Points with an eigenphase within ``branch_tol`` of
    the sawtooth jump are flagged.
    """
    total = 0.0
    flagged = 0
    n = 0
    for phases, w in zip(eigenphase_sets, grid_weights):
        phases = np.asarray(phases)
        if np.any(np.abs(np.mod(phases + math.pi, 2 * math.pi) - math.pi) < branch_tol):
            flagged += 1
        total += w * float(np.sum(sawtooth(-phases)))
        n += 1
    value = (2.0 * math.pi) ** (1 - d) * section_weight * total
    return CorrectionTerm(value, n, 0.0, flagged)


# -- one-dimensional glued oscillator pipeline --------------------------------


def glued_oscillator_normal_form(model: ModelSpec, tau: float):
    """Period-equalised data at spectral level tau.

    Side multipliers omega_j^2 turn both oscillators into unit-frequency
    ones; the level moves into the energy shifts and the interface data:
    Etil_j = E_j + 2 tau / omega_j^2, (alpha, beta) scale by omega_2/omega_1.
    """
    if model.kind != "glued_half_lines_oscillator":
        raise ModelError("normal form applies to glued half-line oscillators")
    shifted = spectral_parameter_shift(model, tau)
    Et = tuple(m.E for m in shifted.media)
    scale = model.media[1].omega / model.media[0].omega
    alpha_t = model.bc.alpha * scale
    beta_t = model.bc.beta * scale
    return Et, alpha_t, beta_t


def glued_oscillator_transfer(model: ModelSpec, tau: float, h: float):
    """Primitive one-hit transfer matrix and flux weights at level tau.

    In the normal form each side's leg is half a unit-frequency oscillator
    period: time pi, action (pi/2) Etil_j, one caustic.  The combined
    per-side phase (spectral dressing plus leg phase) is
    Lambda_j = -pi Etil_j / (2h) + pi/2.
    """
    (E1, E2), alpha_t, beta_t = glued_oscillator_normal_form(model, tau)
    if E1 <= 0 or E2 <= 0:
        raise ModelError("level below the interface-propagation range")
    k1, k2 = math.sqrt(E1), math.sqrt(E2)
    kap, weights = match_interface(0.5, 0.5, k1, k2, alpha_t, beta_t)
    lam = np.array([-math.pi * E1 / (2 * h) + math.pi / 2,
                    -math.pi * E2 / (2 * h) + math.pi / 2])
    K = kap @ np.diag(np.exp(1j * lam))
    return K, weights, (E1, E2)


def glued_oscillator_secular(model: ModelSpec, tau: float, h: float) -> float:
    """Real secular function whose zeros are the predicted cluster centres.

    det(K - 1) = 0 for the primitive transfer reduces to
    cos((S1+S2)/(2h)) - R sin((S1-S2)/(2h)) with S_j = (pi/2) Etil_j and R
    the interface reflection amplitude.
    """
    (E1, E2), alpha_t, beta_t = glued_oscillator_normal_form(model, tau)
    if E1 <= 0 or E2 <= 0:
        raise ModelError("level below the interface-propagation range")
    k1, k2 = math.sqrt(E1), math.sqrt(E2)
    om = abs(beta_t) ** 2 * k1 / k2
    R = (om - 1.0) / (om + 1.0)
    S1 = math.pi / 2 * E1
    S2 = math.pi / 2 * E2
    return math.cos((S1 + S2) / (2 * h)) - R * math.sin((S1 - S2) / (2 * h))


def _single_sided_comb(model: ModelSpec, h: float, window):
    """Closed-form cluster combs of the single-sided periodic models."""
    from .scattering import reflection_factor

    lo, hi = window
    m = model.medium(1)
    roots = []
    if model.kind == "half_space_oscillator":
        if model.d != 1:
            raise ModelError("comb prediction implemented for d = 1")
        # per primitive period: Phi = -S(tau)/h + pi/2 + arg r, S = (pi/2)(2 tau/w^2 + E)
        def gap(tau):
            return 2 * tau / m.omega**2 + m.E
        def phase(tau):
            r = reflection_factor(model.bc, gap(tau))
            return (-math.pi / 2 * gap(tau) / h + math.pi / 2 + cmath.phase(r))
    elif model.kind == "hemisphere_laplacian":
        def phase(tau):
            rad = math.sqrt(tau / m.omega**2 + m.E)
            r = reflection_factor(model.bc, 1.0)
            return -2 * math.pi * rad / h + math.pi + 2 * cmath.phase(r)
    else:
        raise ModelError(f"no comb prediction for {model.kind}")
    # phase is monotone decreasing in tau: solve phase(tau) = -2 pi n
    p_lo, p_hi = phase(lo), phase(hi)
    n_min = math.ceil(-p_lo / (2 * math.pi) - 1e-12)
    n_max = math.floor(-p_hi / (2 * math.pi) + 1e-12)
    for n in range(n_min, n_max + 1):
        f = lambda t, n=n: phase(t) + 2 * math.pi * n
        roots.append(float(brentq(f, lo, hi, xtol=1e-14)))
    return sorted(roots)


def predict_clusters(model: ModelSpec, h: float, window,
                     points_per_spacing: int = 12) -> ClusterPrediction:
    """Predicted eigenvalue cluster centres of a periodic model on a window.

    Glued half-line oscillators: roots of the primitive-transfer secular
    function with the matrix recomputed at every level (no frozen-matrix
    approximation).  Single-sided periodic models: closed-form combs.
    """
    lo, hi = window
    if model.kind == "glued_half_lines_oscillator":
        t_total = math.pi * (1.0 / model.media[0].omega ** 2
                             + 1.0 / model.media[1].omega ** 2)
        spacing = 2.0 * math.pi * h / t_total
        f = lambda tau: glued_oscillator_secular(model, tau, h)
        roots = _bracket_roots(f, lo, hi, spacing / points_per_spacing)
        residuals = tuple(abs(f(r)) for r in roots)
        K, weights, _ = glued_oscillator_transfer(model, 0.5 * (lo + hi), h)
        angles = unitary_angles(K, weights)
        return ClusterPrediction(tuple(roots), tuple(1 for _ in roots),
                                 angles, (lo, hi), h, residuals)
    roots = _single_sided_comb(model, h, window)
    return ClusterPrediction(tuple(roots), tuple(1 for _ in roots),
                             {}, (lo, hi), h, tuple(0.0 for _ in roots))


def decoupled_combs(model: ModelSpec, h: float, window):
    """Per-side Bohr-Sommerfeld combs of the diagonal (no-transmission) monodromy.

    Side j quantises Lambda_j(tau) + arg kappa_jj(tau) = 0 mod 2 pi with
    Lambda_j the primitive per-side phase; returns (comb_side1, comb_side2).
    """
    if model.kind != "glued_half_lines_oscillator":
        raise ModelError("decoupled combs implemented for glued half-lines")
    lo, hi = window
    combs = []
    for j in (0, 1):
        def phase(tau, j=j):
            (E1, E2), alpha_t, beta_t = glued_oscillator_normal_form(model, tau)
            k1, k2 = math.sqrt(E1), math.sqrt(E2)
            om = abs(beta_t) ** 2 * k1 / k2
            R = (om - 1.0) / (om + 1.0)
            diag = R if j == 0 else -R
            lamj = -math.pi * (E1, E2)[j] / (2 * h) + math.pi / 2
            return lamj + cmath.phase(complex(diag))
        p_lo, p_hi = phase(lo), phase(hi)
        n_min = math.ceil(-p_lo / (2 * math.pi) - 1e-12)
        n_max = math.floor(-p_hi / (2 * math.pi) + 1e-12)
        roots = []
        for n in range(n_min, n_max + 1):
            f = lambda t, n=n, j=j: phase(t, j) + 2 * math.pi * n
            roots.append(float(brentq(f, lo, hi, xtol=1e-14)))
        combs.append(sorted(roots))
    return tuple(combs)


def glued_oscillator_correction(model: ModelSpec, tau: float, h: float) -> CorrectionTerm:
    """Counting correction of the glued oscillator: sawtooth of the reversed
    primitive-transfer eigenphases (the boundary phase space is a point)."""
    K, weights, _ = glued_oscillator_transfer(model, tau, h)
    phases = secular_eigenphases(K, weights)
    return counting_correction_from_phases([phases], [1.0], d=1)


def hemisphere_correction(model: ModelSpec, tau: float, h: float,
                          n_grid: int = 256, refine_tol: float = 1e-6) -> CorrectionTerm:
    """Counting correction of the single hemisphere (d = 2).

    The loop phase is constant over the boundary phase space, so the
    integral is the hyperbolic-region area times the sawtooth value; a
    trapezoid grid with doubling refinement documents the quadrature error.
    The two boundary crossings per primitive orbit give section weight 1/2.
    """
    from .scattering import reflection_factor

    if model.kind != "hemisphere_laplacian" or model.d != 2:
        raise ModelError("hemisphere correction needs hemisphere_laplacian, d = 2")
    m = model.medium(1)
    rad = math.sqrt(tau / m.omega**2 + m.E)
    r = reflection_factor(model.bc, 1.0)
    loop_phase = -2 * math.pi * rad / h + math.pi + 2 * cmath.phase(r)

    def quad(n):
        xi = np.linspace(-rad, rad, n)
        vals = np.full(n, sawtooth(-loop_phase))
        area = np.trapz(vals, xi) * 2 * math.pi  # equator length times xi'-band
        return (2 * math.pi) ** (1 - 2) * 0.5 * area

    prev = quad(n_grid)
    n = n_grid
    err = math.inf
    while err > refine_tol and n < 1 << 16:
        n *= 2
        cur = quad(n)
        err = abs(cur - prev)
        prev = cur
    flagged = int(abs((loop_phase + math.pi) % (2 * math.pi) - math.pi) < 1e-9)
    return CorrectionTerm(prev, n, err, flagged)
