"""Harmonic mechanical modes of a levitated particle and their thermal bath."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .constants import AIR_MASS, K_B
from .nv import Check

__all__ = [
    "MechanicalMode",
    "BathStatistics",
    "bath_statistics",
    "thermal_std",
    "stability_check",
    "inertia_sphere",
    "inertia_ellipsoid",
    "damping_from_pressure",
    "mean_free_path",
]

KINDS = ("translational", "librational")


@dataclass(frozen=True)
class MechanicalMode:
    """Damped harmonic mode.

    ``inertia`` is a mass (kg) for translational modes and a moment of
    inertia (kg m^2) for librational ones. ``T_bath`` may be zero for
    deterministic runs.
    """

    kind: str
    inertia: float
    omega0: float
    gamma: float
    T_bath: float = 300.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.inertia > 0:
            raise ValueError("inertia must be positive")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.T_bath < 0:
            raise ValueError("T_bath must be >= 0")

    @property
    def rigidity(self):
        return self.inertia * self.omega0**2

    @property
    def Q(self):
        return self.omega0 / self.gamma


@dataclass(frozen=True)
class BathStatistics:
    #: double-sided white level of the Langevin force or torque, <F(t)F(t')> = level * delta(t-t')
    force_psd_level: float


def bath_statistics(mode):
    return BathStatistics(2.0 * mode.inertia * mode.gamma * K_B * mode.T_bath)


def thermal_std(mode):
    """Equipartition standard deviation sqrt(kT / (inertia omega0^2))."""
    return math.sqrt(K_B * mode.T_bath / mode.rigidity)


def stability_check(mode, factor=10.0):
    """Librational confinement criterion K_t >= factor * kT (boundary inclusive)."""
    if mode.kind != "librational":
        raise ValueError("the confinement criterion applies to librational modes only")
    kT = K_B * mode.T_bath
    ratio = math.inf if kT == 0 else mode.rigidity / kT
    return Check("K_t >= 10 kT", ratio, factor, ratio >= factor)


def inertia_sphere(density, diameter):
    """Mass and moment of inertia (2/5 m r^2) of a homogeneous sphere."""
    if not (density > 0 and diameter > 0):
        raise ValueError("density and diameter must be positive")
    r = diameter / 2
    m = density * 4.0 / 3.0 * math.pi * r**3
    return m, 0.4 * m * r**2


def inertia_ellipsoid(density, a, b, c):
    """Mass and principal moments (Ia, Ib, Ic) of a solid ellipsoid with semi-axes a, b, c."""
    if not (density > 0 and a > 0 and b > 0 and c > 0):
        raise ValueError("density and semi-axes must be positive")
    m = density * 4.0 / 3.0 * math.pi * a * b * c
    return m, (m * (b * b + c * c) / 5, m * (a * a + c * c) / 5, m * (a * a + b * b) / 5)


def mean_free_path(pressure, temperature, molecule_diameter=3.7e-10):
    return K_B * temperature / (math.sqrt(2) * math.pi * molecule_diameter**2 * pressure)


def damping_from_pressure(pressure, temperature, diameter, density, kind="librational",
                          gas_mass=AIR_MASS, shape_factor=1.0, free_molecular=True):
    """Gas damping rate (rad/s) of a sphere in the free-molecular regime.

    Diffuse reflection with full accommodation. With the mean thermal speed
    ``v = sqrt(8 kT / (pi m_gas))`` and radius ``r``::

        translational (Epstein):  gamma = (1 + 8/pi) p / (rho r v)
        librational:              gamma = (10/pi)   p / (rho r v)

    Both are linear in pressure and independent of the trap frequency.
    ``shape_factor`` multiplies the result for non-spherical particles.
    """
    if not pressure > 0:
        raise ValueError("pressure must be positive")
    if not (temperature > 0 and diameter > 0 and density > 0 and gas_mass > 0):
        raise ValueError("temperature, diameter, density and gas_mass must be positive")
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if not free_molecular:
        raise NotImplementedError("only the free-molecular regime is modelled")
    if mean_free_path(pressure, temperature) < diameter:
        warnings.warn("Knudsen number below 1: free-molecular damping is not accurate",
                      stacklevel=2)
    r = diameter / 2
    v = math.sqrt(8 * K_B * temperature / (math.pi * gas_mass))
    coeff = (1 + 8 / math.pi) if kind == "translational" else 10 / math.pi
    return shape_factor * coeff * pressure / (density * r * v)
