"""Driven two-level spin (|0'>, |1'>) coupled to one mechanical coordinate.

Conventions: the detuning seen by the spin at displacement ``x`` is
``Delta(x) = Delta - G x`` and the spin torque (or force) is
``-hbar N G rho11``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import HBAR
from .linalg import cubic_discriminant, real_cubic_roots
from .nv import analytic_frequencies, coupling_constants

__all__ = [
    "TwoLevelState",
    "Drive",
    "DriveState",
    "Equilibrium",
    "EquilibriumSet",
    "MODELS",
    "bloch_rhs",
    "adiabatic_rhs",
    "pumping_rate",
    "steady_population",
    "drive_state",
    "spin_torque",
    "total_torque",
    "total_stiffness",
    "equilibrium_cubic",
    "equilibria",
    "operating_point",
    "detuning_for_operating_point",
]

MODELS = ("saturated", "dispersive")


@dataclass(frozen=True)
class TwoLevelState:
    rho11: float = 0.0
    rho10: complex = 0.0j

    def __post_init__(self):
        if not -1e-9 <= self.rho11 <= 1 + 1e-9:
            raise ValueError("rho11 outside [0, 1]")
        bound = math.sqrt(max(self.rho11 * (1 - self.rho11), 0.0)) + 1e-9
        if abs(self.rho10) > bound:
            raise ValueError("coherence exceeds the positivity bound")


@dataclass(frozen=True)
class Drive:
    """Microwave drive reduced to two-level form.

    G      coupling, rad/s per rad (libration) or per metre (centre of mass)
    Delta  detuning at the trap centre, rad/s
    Omega  two-level Rabi rate, rad/s
    """

    G: float
    Delta: float
    Omega: float

    @classmethod
    def from_field(cls, spin, field, mode, transition=-1):
        """Resolve G and the detuning from the field geometry.

        For librational modes the trap centre is taken at the van Vleck
        shifted angle (spins in |0'>), so Delta already includes that shift.
        Translational modes use the aligned-field geometry.
        """
        if transition not in (+1, -1):
            raise ValueError("transition must be +1 or -1")
        if mode.kind == "librational":
            cc = coupling_constants(spin, field)
            wp, w0, wm = analytic_frequencies(spin, field)
            w_t = (wp if transition == +1 else wm) - w0
            G = cc.G_theta(transition)
            theta_vv = -HBAR * spin.N * cc.beta_zero / mode.rigidity
            return cls(G=G, Delta=field.omega_mw - w_t - G * theta_vv, Omega=field.Omega)
        a = spin.gamma_e * field.B
        G = transition * spin.gamma_e * field.dBz_dz
        return cls(G=G, Delta=field.omega_mw - (spin.D + transition * a), Omega=field.Omega)


@dataclass(frozen=True)
class DriveState:
    Delta_bar: float
    Gamma0: float
    L: float


@dataclass(frozen=True)
class Equilibrium:
    x: float
    stable: bool
    rho11: float
    stiffness: float  # -d(total torque)/dx


@dataclass(frozen=True)
class EquilibriumSet:
    roots: list = field(default_factory=list)
    marginal: bool = False
    model: str = "saturated"
    #: discriminant of the rescaled cubic; > 0 means three real roots
    discriminant: float = 0.0

    @property
    def count(self):
        return len(self.roots)

    @property
    def bistable(self):
        return sum(r.stable for r in self.roots) == 2


def bloch_rhs(rho11, rho10, delta, Omega, Gamma2, gamma_las):
    """Time derivatives (d rho11/dt, d rho10/dt) of the two-level Bloch equations."""
    drho10 = (-Gamma2 + 1j * delta) * rho10 + 0.5j * Omega * (2 * rho11 - 1)
    drho11 = -gamma_las * rho11 + 0.5j * Omega * (rho10 - np.conj(rho10))
    return np.real(drho11), drho10


def pumping_rate(delta, Omega, Gamma2):
    """Incoherent microwave pumping rate Omega^2 Gamma2 / (Gamma2^2 + delta^2)."""
    return Omega**2 * Gamma2 / (Gamma2**2 + delta**2)


def adiabatic_rhs(rho11, delta, Omega, Gamma2, gamma_las):
    """d rho11/dt with the coherence adiabatically eliminated."""
    lor = 1.0 / (1.0 + (delta / Gamma2) ** 2)
    return -gamma_las * rho11 - Omega**2 / (2 * Gamma2) * lor * (2 * rho11 - 1)


def steady_population(delta_bar, Omega, Gamma2, gamma_las):
    g0 = pumping_rate(delta_bar, Omega, Gamma2)
    return 0.5 * g0 / (gamma_las + g0)


def drive_state(delta_bar, Omega, Gamma2):
    return DriveState(delta_bar, pumping_rate(delta_bar, Omega, Gamma2),
                      1.0 / (1.0 + (delta_bar / Gamma2) ** 2))


def spin_torque(spin, drive, x, model="saturated"):
    """Static spin torque (force) at displacement ``x``."""
    d = drive.Delta - drive.G * np.asarray(x, dtype=float)
    if model == "dispersive":
        with np.errstate(divide="ignore"):
            return -HBAR * spin.N * drive.G * drive.Omega**2 / d**2
    if model == "saturated":
        return -HBAR * spin.N * drive.G * steady_population(
            d, drive.Omega, spin.Gamma2_star, spin.gamma_las)
    raise ValueError(f"model must be one of {MODELS}")


def total_torque(spin, drive, mode, x, model="saturated"):
    return -mode.rigidity * np.asarray(x, dtype=float) + spin_torque(spin, drive, x, model)


def total_stiffness(spin, drive, mode, x, model="saturated"):
    """-d/dx of the total torque; positive means restoring."""
    d = drive.Delta - drive.G * x
    hn = HBAR * spin.N
    if model == "dispersive":
        dtau = -2 * hn * drive.G**2 * drive.Omega**2 / d**3
    else:
        g2, gl = spin.Gamma2_star, spin.gamma_las
        r = pumping_rate(d, drive.Omega, g2)
        dr_dx = drive.Omega**2 * g2 * 2 * d * drive.G / (g2**2 + d**2) ** 2
        drho = 0.5 * gl * dr_dx / (gl + r) ** 2
        dtau = -hn * drive.G * drho
    return mode.rigidity - dtau


def equilibrium_cubic(spin, drive, mode, model="saturated"):
    """Monic cubic coefficients (a, b, c) in y = G x whose roots are the equilibria."""
    K = mode.rigidity
    D, G, W = drive.Delta, drive.G, drive.Omega
    hn = HBAR * spin.N
    if model == "dispersive":
        # K x (Delta - G x)^2 + hbar N G Omega^2 = 0
        return -2 * D, D * D, hn * G * G * W * W / K
    if model == "saturated":
        # K x [gl (G2^2 + (Delta - G x)^2) + Omega^2 G2] + hbar N G Omega^2 G2 / 2 = 0
        g2, gl = spin.Gamma2_star, spin.gamma_las
        return (-2 * D, g2 * g2 + D * D + W * W * g2 / gl,
                hn * G * G * W * W * g2 / (2 * K * gl))
    raise ValueError(f"model must be one of {MODELS}")


def equilibria(spin, drive, mode, model="saturated", rtol=1e-9):
    """All static equilibria of trap plus spin torque, ascending in ``x``."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    disc = -1.0
    if drive.G == 0 or drive.Omega == 0:
        xs, marginal = [0.0], False
    else:
        a, b, c = equilibrium_cubic(spin, drive, mode, model)
        s = max(abs(a), math.sqrt(abs(b)), abs(c) ** (1 / 3))
        disc = cubic_discriminant(a / s, b / s**2, c / s**3)
        ys, marginal = real_cubic_roots(a, b, c, rtol=rtol)
        xs = sorted(y / drive.G for y in ys)
    roots = []
    for x in xs:
        k = float(total_stiffness(spin, drive, mode, x, model))
        d = drive.Delta - drive.G * x
        if model == "dispersive":
            rho = drive.Omega**2 / d**2
        else:
            rho = float(steady_population(d, drive.Omega, spin.Gamma2_star, spin.gamma_las))
        roots.append(Equilibrium(x=float(x), stable=k > 0, rho11=rho, stiffness=k))
    return EquilibriumSet(roots=roots, marginal=marginal, model=model, discriminant=disc)


def operating_point(spin, drive, mode, model="saturated", root=None):
    """Equilibrium ``(Delta_bar, x0)`` with Delta_bar = Delta - G x0.

    With several stable equilibria ``root`` (index into the ascending list)
    must be given.
    """
    eq = equilibria(spin, drive, mode, model)
    stable = [r for r in eq.roots if r.stable]
    if root is None:
        if len(stable) != 1:
            raise ValueError(f"{len(stable)} stable equilibria; pass root= to choose one")
        x0 = stable[0].x
    else:
        x0 = eq.roots[root].x
    return drive.Delta - drive.G * x0, x0


def detuning_for_operating_point(spin, G, Omega, mode, delta_bar):
    """Trap-centre detuning that puts the saturated equilibrium at ``delta_bar``."""
    rho = steady_population(delta_bar, Omega, spin.Gamma2_star, spin.gamma_las)
    x0 = -HBAR * spin.N * G * rho / mode.rigidity
    return delta_bar + G * x0

