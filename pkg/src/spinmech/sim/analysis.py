"""Spectral and ring-down analysis of simulated trajectories.

PSDs use the double-sided angular-frequency convention of
:mod:`spinmech.backaction`: ``var = integral S(w) dw / 2 pi`` over the
whole line, reported on w >= 0 only.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from ..constants import K_B, TWO_PI

__all__ = [
    "PSD",
    "RingdownFit",
    "LorentzianFit",
    "NonStationaryWarning",
    "welch_psd",
    "fit_lorentzian",
    "ringdown_fit",
    "equipartition_temperature",
]

MIN_SEGMENTS = 8


class NonStationaryWarning(RuntimeWarning):
    """Block variances drift between the two halves of a record."""


@dataclass(frozen=True)
class PSD:
    omega: np.ndarray  # rad/s, >= 0
    S: np.ndarray  # double-sided, units^2 s / rad
    n_segments: int

    def variance(self):
        """Integrated power, comparable to the sample variance."""
        return float(np.sum(self.S) * (self.omega[1] - self.omega[0]) / math.pi)


@dataclass(frozen=True)
class LorentzianFit:
    omega: float
    gamma: float
    amplitude: float


@dataclass(frozen=True)
class RingdownFit:
    omega: float
    gamma: float
    amplitude: float
    residual_rms: float  # of the log-envelope regression


def _series(data, which, dt):
    if hasattr(data, "sample_dt"):
        return np.asarray(getattr(data, which), dtype=float), data.sample_dt
    if dt is None:
        raise ValueError("dt is required for raw arrays")
    return np.asarray(data, dtype=float), float(dt)


def welch_psd(data, nperseg=None, overlap=0.5, which="x", dt=None, window="hann"):
    """Hann-windowed averaged periodogram.

    ``data`` is a Trajectory (``which`` picks the column), a 1-D array
    sampled every ``dt`` seconds, or a list of equal-length Trajectories
    whose spectra are averaged. ``nperseg`` defaults to the length giving
    eight segments with the given fractional ``overlap``.
    """
    if isinstance(data, (list, tuple)):
        if not data:
            raise ValueError("empty ensemble")
        parts = [welch_psd(d, nperseg, overlap, which, dt, window) for d in data]
        if any(len(q.omega) != len(parts[0].omega) for q in parts):
            raise ValueError("ensemble members differ in length")
        return PSD(omega=parts[0].omega, S=np.mean([q.S for q in parts], axis=0),
                   n_segments=sum(q.n_segments for q in parts))
    x, dt = _series(data, which, dt)
    if not 0 <= overlap < 1:
        raise ValueError("overlap must be in [0, 1)")
    n = len(x)
    if nperseg is None:
        nperseg = int(n / (1 + (MIN_SEGMENTS - 1) * (1 - overlap)))
    nperseg = int(nperseg)
    noverlap = int(round(overlap * nperseg))
    if nperseg < 4 or n < nperseg:
        raise ValueError("trajectory too short for the requested segment length")
    nseg = (n - noverlap) // (nperseg - noverlap)
    if nseg < MIN_SEGMENTS:
        raise ValueError(f"trajectory too short: {nseg} segments, need {MIN_SEGMENTS}")
    f, p = signal.welch(x, fs=1.0 / dt, window=window, nperseg=nperseg, noverlap=noverlap,
                        detrend="constant", return_onesided=True, scaling="density")
    # one-sided P(f) df  ->  double-sided S(w) dw / 2 pi
    return PSD(omega=TWO_PI * f, S=0.5 * p, n_segments=nseg)


def _lorentz(w, log_a, w0, log_g):
    return np.exp(log_a) / ((w0**2 - w**2) ** 2 + np.exp(2 * log_g) * w**2)


def fit_lorentzian(psd, omega_guess=None, gamma_guess=None, span=10.0):
    """Fit A / ((w0^2 - w^2)^2 + g^2 w^2) to the PSD near its peak.

    The fit is done on log S within ``span`` estimated linewidths of the
    peak, which weighs the flanks and the top evenly.
    """
    w, S = psd.omega, psd.S
    pos = w > 0
    w, S = w[pos], S[pos]
    if omega_guess is None:
        k = int(np.argmax(S))
        omega_guess = w[k]
    else:
        k = int(np.argmin(np.abs(w - omega_guess)))
    if gamma_guess is None:
        half = S[k] / 2
        lo = k
        while lo > 0 and S[lo] > half:
            lo -= 1
        hi = k
        while hi < len(S) - 1 and S[hi] > half:
            hi += 1
        gamma_guess = max(w[hi] - w[lo], 2 * (w[1] - w[0]))
    band = np.abs(w - omega_guess) <= span * gamma_guess
    if band.sum() < 5:
        raise ValueError("too few PSD bins around the peak; use longer segments")
    wb, Sb = w[band], S[band]
    a0 = math.log(S[k] * (gamma_guess * omega_guess) ** 2)
    p0 = [a0, omega_guess, math.log(gamma_guess)]

    def resid(p):
        return np.log(_lorentz(wb, *p)) - np.log(Sb)

    sol = optimize.least_squares(resid, p0, x_scale=[1.0, gamma_guess, 1.0])
    log_a, w0, log_g = sol.x
    return LorentzianFit(omega=float(abs(w0)), gamma=float(math.exp(log_g)),
                         amplitude=float(math.exp(log_a)))


def _boxcar(z, n):
    k = np.ones(n) / n
    return np.convolve(z, k, mode="valid")


def _peak_frequency(x, dt):
    n = len(x)
    nfft = 1 << int(math.ceil(math.log2(4 * n)))
    spec = np.abs(np.fft.rfft((x - x.mean()) * np.hanning(n), nfft))
    k = int(np.argmax(spec[1:-1])) + 1
    a, b, c = np.log(spec[k - 1: k + 2] + 1e-300)
    shift = 0.5 * (a - c) / (a - 2 * b + c) if (a - 2 * b + c) != 0 else 0.0
    return TWO_PI * (k + shift) / (nfft * dt)


def ringdown_fit(data, omega_guess=None, which="x", dt=None, floor=1e-6, iterations=3):
    """Frequency and energy damping rate of a free decay.

    The record is demodulated at the current frequency estimate, smoothed
    with two one-period boxcars, and the log-envelope regressed on time
    (slope -gamma/2); the phase slope refines the frequency. Samples whose
    envelope is below ``floor`` times its initial value are ignored.
    """
    x, dt = _series(data, which, dt)
    t = np.arange(len(x)) * dt
    w = _peak_frequency(x, dt) if omega_guess is None else float(omega_guess)
    for _ in range(iterations):
        per = max(int(round(TWO_PI / (w * dt))), 1)
        if len(x) < 6 * per:
            raise ValueError("record shorter than a few oscillation periods")
        z = 2 * x * np.exp(-1j * w * t)
        z = _boxcar(_boxcar(z, per), per)
        tz = t[per - 1:][: len(z)]  # centre of the double window
        amp = np.abs(z)
        keep = amp > floor * amp[0]
        if keep.sum() < 3:
            raise ValueError("no usable decay segment")
        tk, ak = tz[keep], amp[keep]
        slope, icpt = np.polyfit(tk, np.log(ak), 1)
        phase = np.unwrap(np.angle(z[keep]))
        dphi = np.polyfit(tk, phase, 1)[0]
        w = w + dphi
    resid = np.log(ak) - (slope * tk + icpt)
    return RingdownFit(omega=float(w), gamma=float(-2 * slope), amplitude=float(math.exp(icpt)),
                       residual_rms=float(np.sqrt(np.mean(resid**2))))


def _block_variances(x, nblocks):
    blocks = np.array_split(x, nblocks)
    return np.array([np.mean((b - x.mean()) ** 2) for b in blocks])


def _check_stationary(x, nblocks=16, threshold=3.0):
    h = len(x) // 2
    if h < 2 * nblocks:
        return
    a = _block_variances(x[:h], nblocks)
    b = _block_variances(x[h:], nblocks)
    se = math.sqrt(a.var(ddof=1) / nblocks + b.var(ddof=1) / nblocks)
    if se > 0 and abs(a.mean() - b.mean()) > threshold * se:
        warnings.warn(f"variance drifts by {abs(a.mean() - b.mean()) / se:.1f} sigma between halves",
                      NonStationaryWarning, stacklevel=3)


def equipartition_temperature(data, mode, omega=None, discard=0.0, which="x"):
    """Mode temperature inertia * omega^2 <x^2> / k.

    ``data`` is a Trajectory or a list of them (pooled). ``omega`` defaults
    to the bare frequency; pass the fitted one for spin-modified modes.
    ``discard`` drops that fraction of each record as transient.
    """
    trajs = data if isinstance(data, (list, tuple)) else [data]
    if not 0 <= discard < 1:
        raise ValueError("discard must be in [0, 1)")
    parts = []
    for tr in trajs:
        x = np.asarray(getattr(tr, which), dtype=float)
        x = x[int(discard * len(x)):]
        if len(x) < 2:
            raise ValueError("record too short")
        _check_stationary(x)
        parts.append(x - x.mean())
    var = float(np.mean(np.concatenate(parts) ** 2))
    w = mode.omega0 if omega is None else omega
    return mode.inertia * w * w * var / K_B
