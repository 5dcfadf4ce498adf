"""Ready-made parameter sets.

``cooling_setup`` builds an adiabatic-regime libration (Gamma2* = 200 w0,
w0 tau = 1) whose spin back-action changes the damping by a chosen
fraction, with the spin response kept linear over the thermal motion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import HBAR, K_B, TWO_PI
from .mechanics import MechanicalMode
from .nv import SpinSystem
from .spin_dynamics import Drive, detuning_for_operating_point, equilibria

__all__ = ["CoolingSetup", "cooling_setup"]


@dataclass(frozen=True)
class CoolingSetup:
    spin: SpinSystem
    drive: Drive
    mode: MechanicalMode
    delta_bar: float
    x0: float  # static equilibrium angle


def cooling_setup(detuning="red", strength=0.5, f0=1e3, Q=50.0, inertia=1.39e-22,
                  T_bath=300.0, G=TWO_PI * 5e6, gamma2_ratio=200.0):
    """Libration plus drive with gamma_tilde = gamma (1 +/- strength).

    Red detuning (Delta_bar = -Gamma2*/sqrt 3) cools, blue heats. The
    pumping rate and optical repumping are both w0/2 so that w0 tau = 1.
    """
    if detuning not in ("red", "blue"):
        raise ValueError("detuning must be 'red' or 'blue'")
    if not 0 < strength < 1:
        raise ValueError("strength must be in (0, 1)")
    w0 = TWO_PI * f0
    mode = MechanicalMode("librational", inertia, w0, w0 / Q, T_bath)
    gam = gamma2_ratio * w0
    gl = 0.5 * w0
    omega = math.sqrt(2.0 / 3.0 * w0 * gam)  # gives Gamma0 = w0 / 2 at |Delta_bar| = Gamma2*/sqrt 3
    db = (-1 if detuning == "red" else 1) * gam / math.sqrt(3.0)
    # (alpha tau)^2 = (3/16) (G / Gamma2*)^2 at this operating point
    at2 = 3.0 / 16.0 * (G / gam) ** 2
    N = 2 * strength * mode.rigidity / (Q * HBAR * at2 * abs(db))
    spin = SpinSystem(Gamma2_star=gam, gamma_las=gl, N=N)
    delta = detuning_for_operating_point(spin, G, omega, mode, db)
    drive = Drive(G=G, Delta=delta, Omega=omega)
    eq = equilibria(spin, drive, mode)
    stable = [r for r in eq.roots if r.stable]
    if len(stable) != 1:
        raise ValueError("parameters are bistable; lower the strength")
    theta_rms = math.sqrt(K_B * max(T_bath, 1e-30) / mode.rigidity)
    if abs(G) * theta_rms * math.sqrt(1 + strength) > 0.1 * gam:
        raise ValueError("thermal motion sweeps too much of the resonance for a linear response")
    return CoolingSetup(spin=spin, drive=drive, mode=mode, delta_bar=db, x0=stable[0].x)
