"""Sawtooth kernel, its harmonic extension, and oscillatory phase-space sums.

The mean-zero 2 pi-periodic sawtooth

    sawtooth(a) = (pi - a mod 2 pi) / (2 pi),   value 0 at the jumps,

has Fourier series sum_{n>=1} sin(n a)/(pi n); its derivative is the
distributional comb sum_{n != 0} e^{i n a} up to the 1/(2 pi) normalisation
(exposed as SAWTOOTH_COMB_NORMALIZATION and pinned by the one-dimensional
counting oracle).  The harmonic extension to beta > 0 damps each Fourier
mode by e^{-n beta}; it equals the half-plane Poisson average of the
boundary sawtooth, which `sawtooth_poisson_reference` evaluates directly by
piecewise-exact convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# d/dalpha sawtooth = -1/(2 pi) * sum_{n != 0} e^{i n alpha} away from jumps
SAWTOOTH_COMB_NORMALIZATION = 1.0 / (2.0 * math.pi)


def sawtooth(alpha):
    """Mean-zero unit-jump periodic sawtooth; 0 exactly at the jumps."""
    alpha = np.asarray(alpha, dtype=float)
    out = np.arctan2(np.sin(alpha), 1.0 - np.cos(alpha)) / np.pi
    return out if out.ndim else float(out)


def sawtooth_harmonic(alpha, beta):
    """Harmonic (Poisson) extension of the sawtooth to the half-plane beta >= 0.

    Closed form (1/pi) atan2(e^-beta sin a, 1 - e^-beta cos a); harmonic for
    beta > 0, equal to ``sawtooth`` at beta = 0, 2 pi-periodic in alpha and
    o(1) as beta -> +inf.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise ValueError("beta must be >= 0")
    r = np.exp(-beta)
    out = np.arctan2(r * np.sin(alpha), 1.0 - r * np.cos(alpha)) / np.pi
    return out if out.ndim else float(out)


def sawtooth_fourier(alpha, beta, n_terms: int = 10_000):
    """Brute-force Fourier partial sum sum_{n<=N} e^{-n beta} sin(n alpha)/(pi n)."""
    n = np.arange(1, n_terms + 1)
    alpha = np.asarray(alpha, dtype=float)
    terms = np.exp(-np.outer(np.atleast_1d(alpha) * 0 + 1, n) * beta)
    terms *= np.sin(np.outer(np.atleast_1d(alpha), n))
    terms /= np.pi * n
    out = terms.sum(axis=1)
    return out if np.ndim(alpha) else float(out[0])


def damped_geometric_sum(alpha, beta):
    """Closed form of sum_{n != 0} e^{i n alpha - |n| beta} for beta > 0."""
    if np.any(np.asarray(beta) <= 0):
        raise ValueError("beta must be > 0")
    e1 = np.exp(-np.asarray(beta, dtype=float))
    ca = np.cos(np.asarray(alpha, dtype=float))
    out = (2.0 * e1 * ca - 2.0 * e1**2) / (1.0 - 2.0 * e1 * ca + e1**2)
    return out if np.ndim(out) else float(out)


def damped_geometric_partial_sum(alpha, beta, n_terms: int = 10_000):
    """Direct partial sum 2 sum_{n=1}^{N} e^{-n beta} cos(n alpha) (oracle)."""
    n = np.arange(1, n_terms + 1)
    return float(2.0 * np.sum(np.exp(-n * beta) * np.cos(n * alpha)))


def sawtooth_poisson_reference(alpha: float, beta: float, n_periods: int = 20_000):
    """Half-plane Poisson average of the sawtooth, evaluated piecewise exactly.

    The boundary sawtooth is linear on each period, so each period's
    contribution to the convolution with the kernel (1/pi) beta/(s^2+beta^2)
    integrates in closed form; the tail beyond ``n_periods`` periods is
    bounded by beta / (2 pi^2 n_periods) and added as a symmetric estimate
    of zero.  Used as an independent check of the closed form.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    two_pi = 2.0 * math.pi
    c = np.arange(-n_periods, n_periods + 1) * two_pi
    # substitute u = alpha - s on each period (c_k, c_k + 2 pi):
    # integrand (pi - alpha + c_k + u)/(2 pi) * (beta/pi)/(u^2 + beta^2)
    u_lo = alpha - (c + two_pi)
    u_hi = alpha - c
    atan_part = (math.pi - alpha + c) / (2.0 * math.pi**2) * (
        np.arctan(u_hi / beta) - np.arctan(u_lo / beta)
    )
    log_part = beta / (4.0 * math.pi**2) * (
        np.log(u_hi**2 + beta**2) - np.log(u_lo**2 + beta**2)
    )
    return float(np.sum(atan_part + log_part))


@dataclass(frozen=True)
class PhaseField:
    """Sampled phase symbol over an energy-shell grid.

    ``re``: real phase per sample, ``im``: damping (>= 0), ``weight``:
    quadrature measure weights.
    """

    re: np.ndarray
    im: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        re = np.asarray(self.re, dtype=float)
        im = np.asarray(self.im, dtype=float)
        w = np.asarray(self.weight, dtype=float)
        if re.shape != im.shape or re.shape != w.shape:
            raise ValueError("field components must share a shape")
        if np.any(w < 0):
            raise ValueError("weights must be >= 0")
        if np.any(im < -1e-12):
            raise ValueError("damping component must be >= 0")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)
        object.__setattr__(self, "weight", w)

    @classmethod
    def constant(cls, value: float, mass: float, n: int = 1):
        w = np.full(n, mass / n)
        return cls(np.full(n, value), np.zeros(n), w)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weight))


def oscillatory_sum(field: PhaseField, n: int) -> complex:
    """J(n) = sum of w e^{i n re - |n| im} over the sampled shell."""
    z = np.exp(1j * n * field.re - abs(n) * field.im)
    return complex(np.sum(field.weight * z))


def oscillatory_sum_scaled(field: PhaseField, n: int, eps: float, h: float,
                           tau: float, d: int, pairing: str = "printed") -> complex:
    """h-scaled variant (2 pi)^{1-d} sum w e^{i (eps re - tau) n / h - eps im |n| / h}.

    ``pairing="counting"`` flips the fast-phase sign to (tau - eps re) n / h,
    the orientation in which phases grow with the counting function.  Both
    give identical |J|.
    """
    sign = 1.0 if pairing == "printed" else -1.0
    phase = sign * (eps * field.re - tau) * n / h
    damp = eps * field.im * abs(n) / h
    z = np.exp(1j * phase - damp)
    return complex((2.0 * math.pi) ** (1 - d) * np.sum(field.weight * z))


def degeneracy_measure(re_grid, im_grid, spacings, tol_im: float, tol_grad: float) -> float:
    """Weight fraction of samples with small damping and small shell gradient.

    ``re_grid``/``im_grid`` are sampled on a regular grid (1D or 2D) with the
    given spacings; gradients use central differences.
    """
    re = np.asarray(re_grid, dtype=float)
    im = np.asarray(im_grid, dtype=float)
    if re.size < 3:
        raise ValueError("grid too small for finite differences")
    grads = np.gradient(re, *np.atleast_1d(spacings)[: re.ndim])
    if re.ndim == 1:
        grads = [grads]
    gnorm = np.sqrt(sum(g**2 for g in grads))
    mask = (np.abs(im) < tol_im) & (gnorm < tol_grad)
    return float(np.mean(mask))


def damped_counting_correction(field: PhaseField, eps: float, h: float, tau: float,
                               pairing: str = "printed") -> float:
    """Quadrature of the damped sawtooth against the shell measure.

    Integrand sawtooth_harmonic((eps re - tau)/h, eps im / h) with the
    damping component already >= 0 (total absorption im -> inf kills the
    correction).  ``pairing="counting"`` uses (tau - eps re)/h.
    """
    sign = 1.0 if pairing == "printed" else -1.0
    a = sign * (eps * field.re - tau) / h
    b = eps * field.im / h
    vals = sawtooth_harmonic(a, b)
    return float(np.sum(field.weight * vals))


def internal_reflection_phase_field(c1, c2, beta_abs, tau, n_xi: int = 1000,
                                    n_tangent: int = 1):
    """Phase field of the total-internal-reflection regime over the shell.

    Samples the doubled reflection half-phase 2 phi(xi') on the band where
    side 1 propagates and side 2 is evanescent; constant along the flat
    tangential direction.  Requires c1 < c2 so the band is nonempty.
    """
    from .scattering import elliptic_reflection_phase

    if not c1 < c2:
        raise ValueError("internal-elliptic band needs c1 < c2")
    lo = math.sqrt(tau) / c2
    hi = math.sqrt(tau) / c1
    pad = 1e-6 * (hi - lo)
    xi = np.linspace(lo + pad, hi - pad, n_xi)
    phase = np.array([2.0 * elliptic_reflection_phase(c1, c2, beta_abs, x, tau)
                      for x in xi])
    re = np.tile(phase, (n_tangent, 1)).ravel()
    w = np.full(re.shape, (hi - lo) / re.size)
    return PhaseField(re, np.zeros_like(re), w), xi, phase
