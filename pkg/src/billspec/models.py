"""Catalogue of exactly solvable model operators.

Every model is a Schrodinger-type operator on a domain with boundary whose
classical flow is integrable in closed form:

* ``half_space_oscillator`` -- harmonic oscillator symbol
  a = (1/2) omega^2 (|xi|^2 + |x|^2 - E) on the half-space {x_1 >= 0}.
* ``hemisphere_laplacian`` -- a = omega^2 (|xi|^2 - E) on the unit upper
  hemisphere {|x| = 1, x_1 >= 0} (round metric; ambient coordinates).
* ``glued_half_lines_oscillator`` -- two half-line oscillators (d = 1)
  coupled through a transmission condition at x = 0.
* ``glued_half_spaces_free`` -- two free media a_j = c_j^2 |xi|^2 on
  half-spaces glued along {x_1 = 0}; tangential directions live on a flat
  torus of circumference ``transverse_period`` so spectra of related model
  problems are discrete.
* ``glued_hemispheres`` -- two hemispheres glued along the equator.  Period
  equality at every energy forces identical media, which the constructor
  enforces; the interface condition may still scatter nontrivially.

All values are dimensionless; ``h`` is the only scale.  Instances are frozen
dataclasses and safe to share between workers.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi

KINDS = (
    "half_space_oscillator",
    "hemisphere_laplacian",
    "glued_half_lines_oscillator",
    "glued_half_spaces_free",
    "glued_hemispheres",
)
GLUED_KINDS = (
    "glued_half_lines_oscillator",
    "glued_half_spaces_free",
    "glued_hemispheres",
)
OSCILLATOR_KINDS = ("half_space_oscillator", "glued_half_lines_oscillator")
HEMISPHERE_KINDS = ("hemisphere_laplacian", "glued_hemispheres")

SELF_ADJOINT_TOL = 1e-12


class ModelError(ValueError):
    """Invalid model construction or an operation applied out of its domain."""


@dataclass(frozen=True)
class Medium:
    """Per-side coefficients: oscillator/hemisphere (omega, E) or free speed c."""

    omega: float | None = None
    c: float | None = None
    E: float = 0.0

    def __post_init__(self):
        if self.omega is not None and self.omega <= 0:
            raise ModelError(f"omega must be > 0, got {self.omega}")
        if self.c is not None and self.c <= 0:
            raise ModelError(f"c must be > 0, got {self.c}")


@dataclass(frozen=True)
class BoundaryCondition:
    """Boundary condition at the interface / boundary hyperplane.

    ``robin`` carries the momentum-scale parameter beta of the condition
    (h D_1 + i beta) u = 0; ``transmission`` carries (alpha, beta) of
    u_2 = alpha u_1, D_1 u_2 = -beta D_1 u_1 (both sides parametrised by
    x_1 >= 0).  Self-adjointness of a transmission gluing requires
    alpha * conj(beta) = gamma_1 / gamma_2 with gamma_j the normal xi^2
    coefficients; validated by ModelSpec, which knows the media.
    """

    variant: str
    alpha: complex | None = None
    beta: complex | None = None

    def __post_init__(self):
        if self.variant not in ("dirichlet", "neumann", "robin", "transmission"):
            raise ModelError(f"unknown boundary condition {self.variant!r}")
        if self.variant == "robin" and self.beta is None:
            raise ModelError("robin condition needs beta")
        if self.variant == "transmission" and (self.alpha is None or self.beta is None):
            raise ModelError("transmission condition needs alpha and beta")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def robin(cls, beta):
        return cls("robin", beta=complex(beta))

    @classmethod
    def transmission(cls, alpha, beta):
        return cls("transmission", alpha=complex(alpha), beta=complex(beta))


@dataclass(frozen=True)
class PhaseState:
    """Phase-space point with a side tag.

    Half-space kinds: x, xi are d-vectors with x[0] the distance to the
    boundary.  Hemisphere kinds: x, xi are ambient (d+1)-vectors with
    |x| = 1, x . xi = 0 and x[0] >= 0.
    """

    side: int
    x: tuple
    xi: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))
        object.__setattr__(self, "xi", tuple(float(v) for v in np.atleast_1d(self.xi)))
        if self.side not in (1, 2):
            raise ModelError(f"side must be 1 or 2, got {self.side}")
        if len(self.x) != len(self.xi):
            raise ModelError("x and xi must have equal length")

    @property
    def x_arr(self):
        return np.asarray(self.x)

    @property
    def xi_arr(self):
        return np.asarray(self.xi)


@dataclass(frozen=True)
class EnergyShell:
    """Energy level with a sampling thickness."""

    tau: float
    tol: float = 1e-9

    def __post_init__(self):
        if self.tol <= 0:
            raise ModelError("shell thickness must be > 0")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    d: int
    h: float
    media: tuple
    bc: BoundaryCondition = field(default_factory=BoundaryCondition.dirichlet)
    transverse_period: float = TWO_PI

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.d < 1:
            raise ModelError("dimension d must be >= 1")
        if self.h <= 0:
            raise ModelError("h must be > 0")
        if self.transverse_period <= 0:
            raise ModelError("transverse_period must be > 0")
        object.__setattr__(self, "media", tuple(self.media))
        n_expected = 2 if self.kind in GLUED_KINDS else 1
        if len(self.media) != n_expected:
            raise ModelError(
                f"{self.kind} needs exactly {n_expected} media, got {len(self.media)}"
            )
        if self.kind == "glued_half_lines_oscillator" and self.d != 1:
            raise ModelError("glued_half_lines_oscillator is one-dimensional")
        if self.kind in HEMISPHERE_KINDS or self.kind in OSCILLATOR_KINDS:
            for m in self.media:
                if m.omega is None:
                    raise ModelError(f"{self.kind} media need omega")
        if self.kind == "glued_half_spaces_free":
            for m in self.media:
                if m.c is None:
                    raise ModelError("glued_half_spaces_free media need speed c")
        if self.kind == "glued_hemispheres":
            m1, m2 = self.media
            if not (math.isclose(m1.omega, m2.omega) and math.isclose(m1.E, m2.E)):
                raise ModelError(
                    "glued_hemispheres requires identical media: equal flow "
                    "periods at every energy force omega_1 = omega_2, E_1 = E_2"
                )
        if self.kind in GLUED_KINDS:
            if self.bc.variant != "transmission":
                raise ModelError(f"{self.kind} requires a transmission condition")
            target = self.gamma(1) / self.gamma(2)
            resid = abs(self.bc.alpha * self.bc.beta.conjugate() - target)
            if resid > SELF_ADJOINT_TOL * max(1.0, abs(target)):
                raise ModelError(
                    "transmission condition violates self-adjointness: "
                    f"alpha*conj(beta) = {self.bc.alpha * self.bc.beta.conjugate()} "
                    f"!= gamma_1/gamma_2 = {target}"
                )
        elif self.bc.variant == "transmission":
            raise ModelError("transmission condition needs a glued kind")

    # -- per-side coefficient access -------------------------------------

    def medium(self, side: int) -> Medium:
        if side not in (1, 2):
            raise ModelError(f"side must be 1 or 2, got {side}")
        if side == 2 and len(self.media) == 1:
            raise ModelError(f"{self.kind} has a single side")
        return self.media[side - 1]

    def gamma(self, side: int) -> float:
        """Coefficient of xi_1^2 in the symbol (normal group-speed scale)."""
        m = self.medium(side)
        if self.kind in OSCILLATOR_KINDS:
            return 0.5 * m.omega**2
        if self.kind in HEMISPHERE_KINDS:
            return m.omega**2
        return m.c**2

    @property
    def n_sides(self) -> int:
        return len(self.media)


# -- symbol and flow-period operations ------------------------------------


def symbol_value(model: ModelSpec, s: PhaseState) -> float:
    """Evaluate the side's principal symbol at a phase-space point."""
    m = model.medium(s.side)
    x, xi = s.x_arr, s.xi_arr
    if model.kind in OSCILLATOR_KINDS:
        return 0.5 * m.omega**2 * (xi @ xi + x @ x - m.E)
    if model.kind in HEMISPHERE_KINDS:
        return m.omega**2 * (xi @ xi - m.E)
    return m.c**2 * (xi @ xi)


def spectral_parameter_shift(model: ModelSpec, lam: float) -> ModelSpec:
    """Absorb the spectral parameter into the energy shifts.

    Counting eigenvalues <= lam of the original operator equals counting
    negative eigenvalues of the shifted one: a_j - lam =
    (1/2) omega_j^2 (|xi|^2 + |x|^2 - (E_j + 2 lam / omega_j^2)).
    """
    if model.kind not in OSCILLATOR_KINDS:
        raise ModelError("spectral shift applies to oscillator kinds")
    media = tuple(
        replace(m, E=m.E + 2.0 * lam / m.omega**2) for m in model.media
    )
    return replace(model, media=media)


def period_of_energy(model: ModelSpec, side: int, tau: float) -> float:
    """Full period of the boundaryless (doubled) flow of one side at level tau."""
    m = model.medium(side)
    if model.kind in OSCILLATOR_KINDS:
        return TWO_PI / m.omega**2
    if model.kind in HEMISPHERE_KINDS:
        # |xi| = sqrt(tau/omega^2 + E), geodesic speed 2 omega^2 |xi|,
        # great circle length 2 pi.
        rad2 = tau / m.omega**2 + m.E
        if rad2 <= 0:
            raise ModelError(f"tau={tau} below the hemisphere flow range")
        return math.pi / (m.omega**2 * math.sqrt(rad2))
    raise ModelError("free flow is not periodic")


def period_of_energy_quadrature(model: ModelSpec, side: int, tau: float) -> float:
    """Cross-check of the hemisphere period from the angular speed integral."""
    m = model.medium(side)
    if model.kind not in HEMISPHERE_KINDS:
        return period_of_energy(model, side, tau)
    rad2 = tau / m.omega**2 + m.E
    if rad2 <= 0:
        raise ModelError(f"tau={tau} below the hemisphere flow range")
    speed = 2.0 * m.omega**2 * math.sqrt(rad2)
    # arc length of a great circle traversed at constant speed
    n = 2048
    ds = TWO_PI / n
    return sum(ds / speed for _ in range(n))


def energy_reparameterization(model: ModelSpec, side: int, tau: float) -> float:
    """f(tau) = int_0^tau dsigma / T(sigma); the f(a)-flow has period 1."""
    m = model.medium(side)
    if model.kind in OSCILLATOR_KINDS:
        return tau * m.omega**2 / TWO_PI
    if model.kind in HEMISPHERE_KINDS:
        rad2 = tau / m.omega**2 + m.E
        if rad2 < 0:
            raise ModelError(f"tau={tau} below the hemisphere flow range")
        base = max(m.E, 0.0)
        return (
            2.0 * m.omega**4 / (3.0 * math.pi) * (rad2**1.5 - base**1.5)
        )
    raise ModelError("free flow is not periodic")


# -- JSON configuration ----------------------------------------------------


def _complex_from_config(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _complex_to_config(z: complex):
    if z.imag == 0.0:
        return z.real
    return [z.real, z.imag]


def model_from_config(cfg: dict) -> ModelSpec:
    """Build a ModelSpec from a JSON-style dict (schema in docs/config_schema.json)."""
    media = tuple(
        Medium(
            omega=m.get("omega"),
            c=m.get("c"),
            E=float(m.get("E", 0.0)),
        )
        for m in cfg["media"]
    )
    bcfg = cfg.get("bc", {"variant": "dirichlet"})
    variant = bcfg["variant"]
    if variant == "robin":
        bc = BoundaryCondition.robin(_complex_from_config(bcfg["beta"]))
    elif variant == "transmission":
        bc = BoundaryCondition.transmission(
            _complex_from_config(bcfg["alpha"]), _complex_from_config(bcfg["beta"])
        )
    else:
        bc = BoundaryCondition(variant)
    return ModelSpec(
        kind=cfg["kind"],
        d=int(cfg["d"]),
        h=float(cfg["h"]),
        media=media,
        bc=bc,
        transverse_period=float(cfg.get("transverse_period", TWO_PI)),
    )


def model_to_config(model: ModelSpec) -> dict:
    media = []
    for m in model.media:
        entry = {"E": m.E}
        if m.omega is not None:
            entry["omega"] = m.omega
        if m.c is not None:
            entry["c"] = m.c
        media.append(entry)
    bc = {"variant": model.bc.variant}
    if model.bc.alpha is not None:
        bc["alpha"] = _complex_to_config(model.bc.alpha)
    if model.bc.beta is not None:
        bc["beta"] = _complex_to_config(model.bc.beta)
    return {
        "kind": model.kind,
        "d": model.d,
        "h": model.h,
        "media": media,
        "bc": bc,
        "transverse_period": model.transverse_period,
    }


def model_to_json(model: ModelSpec) -> str:
    return json.dumps(model_to_config(model), sort_keys=True)
