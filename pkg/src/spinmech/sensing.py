"""Static spin torques and forces, and thermally limited detection sensitivity."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import GAMMA_E, HBAR, K_B, TWO_PI
from .nv import coupling_constants

__all__ = [
    "SensitivityReport",
    "min_torque",
    "min_force",
    "static_spin_torque",
    "static_spin_force",
    "max_gradient",
    "integration_time",
    "sensitivity_report",
]


@dataclass(frozen=True)
class SensitivityReport:
    min_signal_per_sqrt_bandwidth: float  # N m / sqrt(Hz) or N / sqrt(Hz)
    integration_time_for_target: float
    target: float
    T_bath: float
    gamma: float
    inertia: float


def _brownian_floor(mode):
    if not mode.gamma > 0:
        raise ValueError("gamma must be positive")
    kT = K_B * mode.T_bath
    direct = math.sqrt(4 * kT * mode.gamma * mode.inertia)
    via_q = math.sqrt(4 * kT * mode.rigidity / (mode.Q * mode.omega0))
    if not math.isclose(direct, via_q, rel_tol=1e-12, abs_tol=0.0):
        raise ArithmeticError("sensitivity forms disagree")
    return direct


def min_torque(mode):
    """Smallest torque detectable in a 1 s window, N m / sqrt(Hz)."""
    if mode.kind != "librational":
        raise ValueError("min_torque needs a librational mode")
    return _brownian_floor(mode)


def min_force(mode):
    """Smallest force detectable in a 1 s window, N / sqrt(Hz)."""
    if mode.kind != "translational":
        raise ValueError("min_force needs a translational mode")
    return _brownian_floor(mode)


def static_spin_torque(spin, field, state=-1):
    """Torque -hbar N beta_state with all spins in |state'>."""
    cc = coupling_constants(spin, field)
    beta = {+1: cc.beta_plus, 0: cc.beta_zero, -1: cc.beta_minus}[state]
    return -HBAR * spin.N * beta


def static_spin_force(spin, dBz_dz, state=+1):
    """Force -hbar N m_s gamma_e dBz/dz in an aligned field; ``state`` is m_s."""
    return -HBAR * spin.N * state * spin.gamma_e * dBz_dz


def max_gradient(delta_nu, d, gamma_e=None):
    """Largest usable gradient Delta_nu / (gamma_e d).

    ``delta_nu`` is an ordinary frequency (Hz); gamma_e is converted to Hz/T.
    """
    if delta_nu < 0 or not d > 0:
        raise ValueError("delta_nu must be >= 0 and d > 0")
    g_hz = (GAMMA_E if gamma_e is None else gamma_e) / TWO_PI
    return delta_nu / (g_hz * d)


def integration_time(mode, target):
    """Averaging time needed to resolve a static ``target`` torque or force."""
    if not target > 0:
        raise ValueError("target must be positive")
    return _brownian_floor(mode) ** 2 / target**2


def sensitivity_report(mode, target):
    return SensitivityReport(
        min_signal_per_sqrt_bandwidth=_brownian_floor(mode),
        integration_time_for_target=integration_time(mode, target),
        target=target,
        T_bath=mode.T_bath,
        gamma=mode.gamma,
        inertia=mode.inertia,
    )
