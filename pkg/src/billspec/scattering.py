"""One-dimensional interface problem: reflection and refraction amplitudes.

The transmission condition glues two media along {x_1 = 0} (both sides
parametrised by x_1 >= 0):

    u_2(0) = alpha u_1(0),      D_1 u_2(0) = -beta D_1 u_1(0),

self-adjoint iff alpha * conj(beta) = gamma_1 / gamma_2, where gamma_j is the
coefficient of xi_1^2 in the side-j symbol.  The scattering matrix is
computed by solving the two-wave matching system directly; the closed forms
(`kappa11_both_hyperbolic`, `elliptic_reflection_phase`) are validation
targets derived independently and are cross-checked in the test suite.

Wave convention: the incident wave on a side is e^{+ikx}, the outgoing one
e^{-ikx}, and an evanescent side carries the decaying root k = -i kappa.
This orientation makes the Robin phase equal (sqrt(gap) + i beta) /
(sqrt(gap) - i beta), i.e. +1 for Neumann and -1 for Dirichlet, and it is
the orientation under which the cluster predictions reproduce the exact
spectra of the solvable models (see the oracle tests).

Flux weights w_j = |{a_j, x_1}| = 2 gamma_j k_j at the propagating roots
make the matrix unitary in the weighted norm; in the total-internal-
reflection regime the reflection coefficient has modulus one.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass

import numpy as np

GLANCE_TOL = 1e-8


class ScatteringError(ValueError):
    pass


@dataclass(frozen=True)
class ModeClassification:
    """Per-side propagation regime with margins tau - c_j^2 |xi'|^2."""

    side1: str
    side2: str
    margin1: float
    margin2: float

    @property
    def regime(self) -> str:
        if self.side1 == "hyperbolic" and self.side2 == "hyperbolic":
            return "both_hyperbolic"
        if "glancing" in (self.side1, self.side2):
            return "glancing"
        if self.side1 == "hyperbolic":
            return "internal_elliptic"
        if self.side2 == "hyperbolic":
            return "internal_elliptic_side1"
        return "both_elliptic"


@dataclass(frozen=True)
class ScatteringMatrix:
    """2x2 amplitude matrix (kappa[j, k]: into side j+1 from side k+1)."""

    kappa: np.ndarray
    weights: tuple
    tau: float
    xi_perp: float
    regime: str

    def unitarity_residual(self) -> float:
        """|| kappa^* W kappa - W || in the flux norm (both-hyperbolic only)."""
        W = np.diag(self.weights)
        return float(np.max(np.abs(self.kappa.conj().T @ W @ self.kappa - W)))


def robin_reflection_phase(gap: float, beta, convention: str = "stated") -> complex:
    """Unit-modulus reflection factor of the Robin condition (h D_1 + i beta) u = 0.

    ``gap`` is the squared normal momentum tau - a' > 0.  beta = 0 gives +1
    (Neumann) and beta -> inf gives -1 (Dirichlet).  ``convention="printed"``
    applies an extra overall minus sign (the opposite endpoint assignment);
    it is kept only for comparison and is not used by the predictors.
    """
    if gap <= 0:
        raise ScatteringError(f"gap must be > 0, got {gap}")
    beta = complex(beta)
    if abs(beta.imag) > 1e-12 * max(1.0, abs(beta)):
        raise ScatteringError("complex beta would break |reflection| = 1")
    k = math.sqrt(gap)
    val = (k + 1j * beta) / (k - 1j * beta)
    if convention == "printed":
        return -val
    if convention != "stated":
        raise ScatteringError(f"unknown convention {convention!r}")
    return val


def reflection_factor(bc, gap: float) -> complex:
    """Reflection factor for a single-sided boundary condition."""
    if bc.variant == "dirichlet":
        return -1.0 + 0.0j
    if bc.variant == "neumann":
        return 1.0 + 0.0j
    if bc.variant == "robin":
        return robin_reflection_phase(gap, bc.beta)
    raise ScatteringError(f"no single-sided reflection for {bc.variant}")


def classify_modes(c1: float, c2: float, xi_perp: float, tau: float,
                   glance_tol: float = GLANCE_TOL) -> ModeClassification:
    """Hyperbolic / elliptic / glancing classification of both sides."""
    m1 = tau - c1**2 * xi_perp**2
    m2 = tau - c2**2 * xi_perp**2
    def tag(m):
        if abs(m) < glance_tol:
            return "glancing"
        return "hyperbolic" if m > 0 else "elliptic"
    return ModeClassification(tag(m1), tag(m2), m1, m2)


def match_interface(gamma1: float, gamma2: float, k1: complex, k2: complex,
                    alpha: complex, beta: complex):
    """Solve the plane-wave matching system for both incidence directions.

    ``k_j`` is the normal root on side j: real positive when propagating,
    ``-1j * kappa_j`` when evanescent.  Returns (kappa_matrix, weights) with
    weights w_j = 2 gamma_j Re k_j (zero on an evanescent side).
    """
    alpha = complex(alpha)
    beta = complex(beta)
    kap = np.zeros((2, 2), dtype=complex)
    # incident from side 1: u1 = e^{ik1 x} + R e^{-ik1 x}, u2 = T e^{-ik2 x}
    A = np.array([[-alpha, 1.0], [beta * k1, k2]], dtype=complex)
    R, T = np.linalg.solve(A, np.array([alpha, beta * k1], dtype=complex))
    kap[0, 0] = R
    kap[1, 0] = T
    # incident from side 2: u2 = e^{ik2 x} + R e^{-ik2 x}, u1 = T e^{-ik1 x}
    A = np.array([[1.0, -alpha], [-k2, -beta * k1]], dtype=complex)
    R, T = np.linalg.solve(A, np.array([-1.0, -k2], dtype=complex))
    kap[1, 1] = R
    kap[0, 1] = T
    w1 = 2.0 * gamma1 * k1.real if abs(k1.imag) == 0.0 else 0.0
    w2 = 2.0 * gamma2 * k2.real if abs(k2.imag) == 0.0 else 0.0
    return kap, (w1, w2)


def transmission_matrix(c1: float, c2: float, alpha: complex, beta: complex,
                        xi_perp: float, tau: float,
                        glance_tol: float = GLANCE_TOL) -> ScatteringMatrix:
    """Reflection-refraction matrix for two free media a_j = c_j^2 |xi|^2."""
    alpha = complex(alpha)
    beta = complex(beta)
    target = c1**2 / c2**2
    if abs(alpha * beta.conjugate() - target) > 1e-10 * max(1.0, target):
        raise ScatteringError(
            f"self-adjointness violated: alpha*conj(beta)={alpha*beta.conjugate()}"
            f" != c1^2/c2^2 = {target}"
        )
    modes = classify_modes(c1, c2, xi_perp, tau, glance_tol)
    if modes.regime == "glancing":
        raise ScatteringError("glancing classification at the requested point")
    if modes.regime == "both_elliptic":
        raise ScatteringError("no propagating mode on either side")
    k1 = _normal_root(modes.margin1, c1)
    k2 = _normal_root(modes.margin2, c2)
    kap, weights = match_interface(c1**2, c2**2, k1, k2, alpha, beta)
    return ScatteringMatrix(kap, weights, tau, xi_perp, modes.regime)


def _normal_root(margin: float, c: float) -> complex:
    if margin > 0:
        return complex(math.sqrt(margin) / c)
    return -1j * math.sqrt(-margin) / c


# -- closed-form validation targets ----------------------------------------


def omega_ratio(gamma1: float, gamma2: float, k1: float, k2: float,
                beta_abs: float) -> float:
    """Impedance-style ratio entering the both-hyperbolic reflection amplitude."""
    return beta_abs**2 * gamma2 * k1 / (gamma1 * k2)


def kappa11_both_hyperbolic(c1, c2, beta_abs, xi_perp, tau) -> float:
    """kappa_11 = (omega - 1)/(omega + 1) with the matching-derived omega.

    The ratio is omega = |beta|^2 gamma_2 k_1 / (gamma_1 k_2); it tends to
    +infinity (kappa_11 -> +1, Neumann-type decoupling) as |beta| -> inf and
    to 0 (kappa_11 -> -1, Dirichlet-type) as |beta| -> 0, and kappa_11
    vanishes at perfect impedance match.
    """
    k1 = math.sqrt(tau - c1**2 * xi_perp**2) / c1
    k2 = math.sqrt(tau - c2**2 * xi_perp**2) / c2
    om = omega_ratio(c1**2, c2**2, k1, k2, beta_abs)
    return (om - 1.0) / (om + 1.0)


def elliptic_reflection_phase(c1, c2, beta_abs, xi_perp, tau) -> float:
    """Half-phase phi of the total-internal-reflection coefficient e^{2 i phi}.

    phi = arctan( gamma_1 kappa_2 / (gamma_2 |beta|^2 k_1) ) with k_1 the
    propagating root on side 1 and kappa_2 the decay rate on side 2.
    """
    k1 = math.sqrt(tau - c1**2 * xi_perp**2) / c1
    kap2 = math.sqrt(c2**2 * xi_perp**2 - tau) / c2
    return math.atan(c1**2 * kap2 / (c2**2 * beta_abs**2 * k1))


# -- trapped-mode scan ------------------------------------------------------


def trapped_mode_determinant(gamma1, gamma2, alpha, beta, xi_perp, tau, c1, c2):
    """Boundary determinant of the decaying/outgoing exponential ansatz.

    On each side the admissible root lambda_j is the decaying one
    (+i kappa_j) when elliptic, else the outgoing real one (+k_j).  A zero
    signals a nontrivial solution of the homogeneous interface problem.
    Normalised by the term magnitudes so the scan tolerance is relative.
    """
    def root(c):
        marg = tau - c**2 * xi_perp**2
        if marg >= 0:
            return complex(math.sqrt(marg) / c)
        return 1j * math.sqrt(-marg) / c
    lam1, lam2 = root(c1), root(c2)
    alpha = complex(alpha)
    beta = complex(beta)
    det = alpha * lam2 + beta * lam1
    scale = abs(alpha * lam2) + abs(beta * lam1)
    return det / scale if scale > 0 else det


def detect_trapped_modes(c1, c2, alpha, beta, xi_grid, tau, tol: float = 1e-8):
    """Scan a tangential-momentum grid for trapped-mode candidates.

    Returns (mask, fraction).  Self-adjoint gluings of the model catalogue
    yield an empty set; the function accepts arbitrary (alpha, beta) so
    deliberately de-tuned data can be used to validate the detector.
    """
    xi_grid = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    if xi_grid.size == 0:
        raise ScatteringError("grid must be non-empty")
    mask = np.zeros(xi_grid.shape, dtype=bool)
    for i, xi in enumerate(xi_grid):
        det = trapped_mode_determinant(c1**2, c2**2, alpha, beta, xi, tau, c1, c2)
        mask[i] = abs(det) < tol
    return mask, float(np.mean(mask))


# -- table export -----------------------------------------------------------


def scattering_table_rows(c1, c2, alpha, beta, xi_grid, tau,
                          glance_tol: float = GLANCE_TOL):
    """Rows (xi', tau, regime, Re/Im kappa_jk, w1, w2, unitarity residual)."""
    rows = []
    for xi in xi_grid:
        modes = classify_modes(c1, c2, xi, tau, glance_tol)
        if modes.regime in ("glancing", "both_elliptic"):
            rows.append({"xi_perp": xi, "tau": tau, "regime": modes.regime})
            continue
        sm = transmission_matrix(c1, c2, alpha, beta, xi, tau, glance_tol)
        row = {"xi_perp": xi, "tau": tau, "regime": sm.regime,
               "w1": sm.weights[0], "w2": sm.weights[1]}
        for j in range(2):
            for k in range(2):
                row[f"re_k{j+1}{k+1}"] = sm.kappa[j, k].real
                row[f"im_k{j+1}{k+1}"] = sm.kappa[j, k].imag
        row["unitarity_residual"] = (
            sm.unitarity_residual() if sm.regime == "both_hyperbolic"
            else abs(abs(sm.kappa[0, 0]) - 1.0)
        )
        rows.append(row)
    return rows


def write_scattering_csv(rows, fh):
    fields = ["xi_perp", "tau", "regime",
              "re_k11", "im_k11", "re_k12", "im_k12",
              "re_k21", "im_k21", "re_k22", "im_k22",
              "w1", "w2", "unitarity_residual"]
    writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in fields})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return v
