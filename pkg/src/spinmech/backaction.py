"""Dynamical spin back-action on a mechanical mode.

Fourier convention ``x(t) ~ exp(-i w t)``, so the bare susceptibility is
``1 / (I (w0^2 - w^2 - i w gamma))``. PSDs are double-sided in angular
frequency: ``<x^2> = integral S(w) dw / 2 pi`` over the whole real line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .constants import HBAR, K_B
from .spin_dynamics import pumping_rate

__all__ = [
    "InstabilityError",
    "BackactionResult",
    "dispersive_rigidity",
    "adiabatic_parameters",
    "adiabatic_rigidity",
    "modified_mode",
    "adiabatic_modified_mode",
    "susceptibility",
    "psd",
    "final_temperature",
    "spectral_temperature",
    "analyze",
]


class InstabilityError(ArithmeticError):
    """Spin back-action drives the effective damping to zero or below."""


@dataclass(frozen=True)
class BackactionResult:
    K_s_at_omega0: complex
    omega_tilde: float
    gamma_tilde: float
    T_f: float
    alpha: float
    tau: float
    Gamma0: float
    delta_bar: float
    unstable: bool = False


def dispersive_rigidity(spin, drive, delta_bar):
    """Static torque and spin rigidity in the dispersive limit Omega << |Delta_bar|.

    Returns ``(tau_s0, K_s)`` with ``tau_s0 = -hbar N G (Omega/Delta_bar)^2``
    (same sign convention as the dynamical torque) and
    ``K_s = -2 hbar N G^2 Omega^2 / Delta_bar^3``.
    """
    if delta_bar == 0:
        raise ZeroDivisionError("dispersive rigidity is singular at zero detuning")
    hn = HBAR * spin.N
    tau0 = -hn * drive.G * (drive.Omega / delta_bar) ** 2
    K_s = -2 * hn * drive.G**2 * drive.Omega**2 / delta_bar**3
    return tau0, K_s


def adiabatic_parameters(spin, drive, delta_bar):
    """``(Gamma0, alpha, tau)`` of the adiabatic spin response."""
    g2, gl = spin.Gamma2_star, spin.gamma_las
    g0 = pumping_rate(delta_bar, drive.Omega, g2)
    tau = 1.0 / (gl + g0)
    if drive.Omega == 0:
        return g0, 0.0, tau
    alpha = abs(drive.G) * math.sqrt(gl * g0**2 / (g2 * drive.Omega**2))
    return g0, alpha, tau


def adiabatic_rigidity(spin, drive, delta_bar, omega):
    """Complex spin rigidity K_s(omega) = -hbar N Delta_bar (alpha tau)^2 / (1 - i omega tau)."""
    _, alpha, tau = adiabatic_parameters(spin, drive, delta_bar)
    omega = np.asarray(omega, dtype=float)
    return -HBAR * spin.N * delta_bar * (alpha * tau) ** 2 / (1 - 1j * omega * tau)


def modified_mode(mode, K_s, self_consistent=False, tol=1e-14, max_iter=100):
    """Shifted frequency and damping ``(omega_tilde, gamma_tilde)``.

    ``K_s`` is either the rigidity at the bare frequency or, when
    ``self_consistent`` is set, a callable evaluated at omega_tilde until
    the shift converges.
    """
    Kt = mode.rigidity
    if callable(K_s):
        fn = K_s
        k = complex(fn(mode.omega0))
        w = mode.omega0
        if self_consistent:
            for _ in range(max_iter):
                w_new = mode.omega0 * (1 - k.real / (2 * Kt))
                k = complex(fn(w_new))
                if abs(w_new - w) <= tol * mode.omega0:
                    w = w_new
                    break
                w = w_new
    else:
        k = complex(K_s)
    w_t = mode.omega0 * (1 - k.real / (2 * Kt))
    # gamma (1 + Q Im K / K_t), written so that gamma = 0 is allowed
    g_t = mode.gamma + k.imag / (mode.inertia * mode.omega0)
    return w_t, g_t


def adiabatic_modified_mode(spin, drive, mode, delta_bar):
    """Closed-form adiabatic frequency shift and damping."""
    _, alpha, tau = adiabatic_parameters(spin, drive, delta_bar)
    Kt = mode.rigidity
    wt = mode.omega0 * tau
    common = HBAR * spin.N * (alpha * tau) ** 2 / (1 + wt**2) * delta_bar
    w_t = mode.omega0 * (1 + common / (2 * Kt))
    g_t = mode.gamma - mode.omega0 * common * wt / Kt  # gamma (1 - Q ...)
    return w_t, g_t


def _ks_values(K_s, omega):
    if callable(K_s):
        return np.asarray(K_s(omega), dtype=complex)
    return np.broadcast_to(np.asarray(K_s, dtype=complex), np.shape(omega))


def susceptibility(mode, K_s, omega):
    """Effective susceptibility on a grid of positive angular frequencies."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("frequency grid must be strictly positive")
    return 1.0 / (mode.inertia * (mode.omega0**2 - omega**2 - 1j * omega * mode.gamma)
                  - _ks_values(K_s, omega))


def psd(mode, K_s, omega):
    """Displacement PSD |chi|^2 S_T with S_T = 2 k T inertia gamma (bath temperature)."""
    s_t = 2 * K_B * mode.T_bath * mode.inertia * mode.gamma
    return np.abs(susceptibility(mode, K_s, omega)) ** 2 * s_t


def final_temperature(mode, gamma_tilde):
    if not gamma_tilde > 0:
        raise InstabilityError(f"effective damping {gamma_tilde:.3g} <= 0")
    return mode.gamma / gamma_tilde * mode.T_bath


def spectral_temperature(mode, K_s, omega=None):
    """``inertia omega^2 <x^2> / k`` with ``<x^2>`` integrated from :func:`psd`.

    This is what an equipartition estimate converges to under the full
    frequency-dependent rigidity. It differs from :func:`final_temperature`
    at order ``gamma_tilde / omega_tilde``. ``omega`` defaults to the
    shifted frequency.
    """
    w_t, g_t = modified_mode(mode, K_s)
    if not g_t > 0:
        raise InstabilityError(f"effective damping {g_t:.3g} <= 0")
    f = lambda w: float(psd(mode, K_s, np.array([w]))[0])  # noqa: E731
    lo = 1e-9 * w_t
    # breakpoints spaced geometrically away from the peak keep quad converged
    offs = g_t * 10.0 ** np.arange(-1.0, math.log10(20 * w_t / g_t) + 0.5, 0.5)
    pts = sorted({lo, w_t, 20 * w_t}
                 | {float(w_t + s * d) for d in offs for s in (-1, 1) if lo < w_t + s * d < 20 * w_t})
    area = sum(integrate.quad(f, a, b, limit=400, epsrel=1e-10)[0] for a, b in zip(pts, pts[1:]))
    area += integrate.quad(f, pts[-1], math.inf, limit=400)[0]
    var = area / math.pi  # both halves of the double-sided spectrum
    w = w_t if omega is None else omega
    return mode.inertia * w * w * var / K_B


def analyze(spin, drive, mode, delta_bar, self_consistent=False):
    """Adiabatic back-action summary at the operating detuning ``delta_bar``."""
    g0, alpha, tau = adiabatic_parameters(spin, drive, delta_bar)
    ks = lambda w: adiabatic_rigidity(spin, drive, delta_bar, w)  # noqa: E731
    w_t, g_t = modified_mode(mode, ks, self_consistent=self_consistent)
    unstable = not g_t > 0
    T_f = math.inf if unstable else final_temperature(mode, g_t)
    return BackactionResult(
        K_s_at_omega0=complex(ks(mode.omega0)),
        omega_tilde=w_t,
        gamma_tilde=g_t,
        T_f=T_f,
        alpha=alpha,
        tau=tau,
        Gamma0=g0,
        delta_bar=delta_bar,
        unstable=unstable,
    )
