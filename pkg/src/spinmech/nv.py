"""NV- ground-state spin: eigenstructure versus field angle and coupling constants.

The spin Hamiltonian in the NV frame is

    H / hbar = D Sz^2 + gamma_e B (cos(theta') Sz - sin(theta') Sx)

with the basis ordered (|+1>, |0>, |-1>). Frequencies and rates are in rad/s.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import D_NV, GAMMA_E, HBAR, K_B, TWO_PI
from .linalg import eigh3

__all__ = [
    "SpinSystem",
    "FieldConfig",
    "Eigensystem",
    "CouplingConstants",
    "OptimalCoupling",
    "Check",
    "LabelingError",
    "PerturbativeWarning",
    "SZ",
    "SX",
    "SY",
    "spin_hamiltonian",
    "exact_eigensystem",
    "analytic_frequencies",
    "frequencies_at",
    "betas_at",
    "coupling_constants",
    "coupling_G",
    "exact_coupling_G",
    "optimal_coupling",
    "odmr_spectrum",
    "odmr_spectrum_ensemble",
    "NV_ORIENTATIONS",
    "validity_report",
]

LABELS = (+1, 0, -1)
_INDEX = {+1: 0, 0: 1, -1: 2}

SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / math.sqrt(2)
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / math.sqrt(2)


class LabelingError(ValueError):
    """Adiabatic state labels cannot be assigned unambiguously."""


class PerturbativeWarning(UserWarning):
    """Inputs outside the regime where the second-order expansion holds."""


@dataclass(frozen=True)
class SpinSystem:
    """NV ensemble parameters. Rates in rad/s, T1 in seconds."""

    D: float = D_NV
    gamma_e: float = GAMMA_E
    Gamma2_star: float = TWO_PI * 5e6
    gamma_las: float = TWO_PI * 10e3
    N: int = 1
    T1: float = 1e-3

    def __post_init__(self):
        for name in ("D", "gamma_e", "Gamma2_star", "gamma_las", "T1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.gamma_las / 2 < self.Gamma2_star:
            raise ValueError("require gamma_las/2 < Gamma2_star")


@dataclass(frozen=True)
class FieldConfig:
    """Static field, its gradient and the microwave drive.

    ``theta_prime`` is the equilibrium angle between B and the NV axis.
    ``Omega`` is the two-level Rabi rate entering the Bloch equations.
    """

    B: float = 50e-4
    theta_prime: float = 0.0
    dBz_dz: float = 0.0
    Omega: float = 0.0
    omega_mw: float = D_NV

    def __post_init__(self):
        if self.B < 0:
            raise ValueError("B must be >= 0")
        if not 0.0 <= self.theta_prime <= math.pi:
            raise ValueError("theta_prime must lie in [0, pi]")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0")


@dataclass(frozen=True)
class Eigensystem:
    """Labelled eigenpairs; index 0, 1, 2 are the |+1'>, |0'>, |-1'> states."""

    frequencies: np.ndarray
    states: np.ndarray  # rows are state vectors in the (|+1>,|0>,|-1>) basis

    def frequency(self, label):
        return self.frequencies[_INDEX[label]]

    def state(self, label):
        return self.states[_INDEX[label]]

    def transition(self, label):
        """Angular frequency of the |0'> -> |label'> transition."""
        return self.frequency(label) - self.frequency(0)


@dataclass(frozen=True)
class CouplingConstants:
    beta_plus: float
    beta_zero: float
    beta_minus: float
    G_theta_plus: float
    G_theta_minus: float
    G_z: float

    def G_theta(self, transition):
        return self.G_theta_plus if transition == +1 else self.G_theta_minus


@dataclass(frozen=True)
class OptimalCoupling:
    theta_analytic: float
    G_analytic: float
    theta_exact: float
    G_exact: float


@dataclass(frozen=True)
class Check:
    name: str
    ratio: float
    threshold: float
    passed: bool

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: ratio={self.ratio:.3g} (need >= {self.threshold:g})"


def spin_hamiltonian(spin, B, theta):
    """3x3 Hamiltonian / hbar in the NV frame, rad/s."""
    a = spin.gamma_e * B
    return spin.D * SZ @ SZ + a * (math.cos(theta) * SZ - math.sin(theta) * SX)


def _assign_labels(vecs, lam=None, tol=1e-9):
    """Permutation maximising total overlap with |+1>, |0>, |-1>.

    ``vecs`` has eigenvectors as columns. Returns perm with perm[label_index]
    = column index. Overlap ties are broken by energy order (higher energy
    gets the higher m_s label); if the energies tie as well the labelling is
    ambiguous and LabelingError is raised.
    """
    ov = np.abs(vecs) ** 2  # ov[basis, column]
    scored = [(ov[0, p[0]] + ov[1, p[1]] + ov[2, p[2]], p) for p in _PERMS]
    best = max(t[0] for t in scored)
    tied = [p for sc, p in scored if best - sc < tol]
    if len(tied) == 1:
        return tied[0]
    if lam is not None:
        scale = max(float(np.max(np.abs(lam))), 1e-300)
        tied.sort(key=lambda p: (-lam[p[0]], -lam[p[1]]))
        e0 = np.array([lam[i] for i in tied[0]])
        e1 = np.array([lam[i] for i in tied[1]])
        if np.max(np.abs(e0 - e1)) > tol * scale:
            return tied[0]
    raise LabelingError("eigenstate overlaps with the aligned-field basis are indistinguishable")


_PERMS = tuple(itertools.permutations(range(3)))


def exact_eigensystem(spin, field, theta=None):
    """Exact diagonalisation with adiabatic labelling.

    ``theta`` overrides ``field.theta_prime`` (used for finite differences).
    """
    if field.B < 0:
        raise ValueError("B must be >= 0")
    th = field.theta_prime if theta is None else theta
    lam, vecs = eigh3(spin_hamiltonian(spin, field.B, th))
    perm = _assign_labels(vecs, lam)
    freqs = np.array([lam[perm[i]] for i in range(3)])
    states = np.array([vecs[:, perm[i]] for i in range(3)])
    # fix a global phase: largest component real and positive
    for i in range(3):
        k = np.argmax(np.abs(states[i]))
        states[i] *= np.conj(states[i][k]) / abs(states[i][k])
    return Eigensystem(freqs, states)


def frequencies_at(D, a, theta):
    """Second-order frequencies (w+1, w0, w-1) for Zeeman rate ``a`` = gamma_e B."""
    s2 = np.sin(theta) ** 2
    c = np.cos(theta)
    q = a * a / D
    return (D + a * c + q * s2 / 2, -q * s2, D - a * c + q * s2 / 2)


def betas_at(D, a, theta):
    """Angular derivatives (beta+1, beta0, beta-1) of :func:`frequencies_at`."""
    s = np.sin(theta)
    c = np.cos(theta)
    q = a * a / D
    return (-a * s + q * s * c, -q * np.sin(2 * theta), a * s + q * s * c)


def _check_perturbative(spin, field):
    a = spin.gamma_e * field.B
    if a / spin.D > 0.3:
        warnings.warn(
            f"gamma_e B / D = {a / spin.D:.3f} > 0.3: second-order expansion unreliable",
            PerturbativeWarning,
            stacklevel=3,
        )
    th = field.theta_prime
    if math.sin(th) ** 2 >= math.cos(th):
        warnings.warn(
            "sin^2(theta') >= cos(theta'): excited-state mixing is not small",
            PerturbativeWarning,
            stacklevel=3,
        )


def analytic_frequencies(spin, field):
    """Perturbative (w+1, w0, w-1) at the configured angle."""
    _check_perturbative(spin, field)
    return frequencies_at(spin.D, spin.gamma_e * field.B, field.theta_prime)


def coupling_G(spin, B, theta, transition):
    """Analytic G_theta = beta_i - beta_0 for ``transition`` in {+1, -1}."""
    bp, b0, bm = betas_at(spin.D, spin.gamma_e * B, theta)
    return (bp if transition == +1 else bm) - b0


def coupling_constants(spin, field):
    _check_perturbative(spin, field)
    bp, b0, bm = betas_at(spin.D, spin.gamma_e * field.B, field.theta_prime)
    return CouplingConstants(
        beta_plus=float(bp),
        beta_zero=float(b0),
        beta_minus=float(bm),
        G_theta_plus=float(bp - b0),
        G_theta_minus=float(bm - b0),
        G_z=spin.gamma_e * field.dBz_dz,
    )


def exact_coupling_G(spin, B, theta, transition, h=1e-6):
    """G_theta from a centred finite difference of exact transition frequencies."""
    f = FieldConfig(B=B)
    h = min(h, abs(math.pi / 2 - theta) / 4) or h
    up = exact_eigensystem(spin, f, theta + h).transition(transition)
    dn = exact_eigensystem(spin, f, theta - h).transition(transition)
    return (up - dn) / (2 * h)


def _maximise(fun, lo, hi, n=400):
    # dense grid, refined near pi/2 where the exact optimum crowds, then Brent
    grid = np.concatenate([
        np.linspace(lo, hi, n),
        math.pi / 2 - np.geomspace(math.pi / 2 - lo, math.pi / 2 - hi, n),
    ])
    grid = np.unique(grid[(grid >= lo) & (grid <= hi)])
    vals = np.array([fun(t) for t in grid])
    k = int(np.argmax(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    if b > a:
        res = minimize_scalar(lambda t: -fun(t), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10 * max(b - a, 1e-300) + 1e-12})
        if -res.fun > vals[k]:
            return float(res.x), float(-res.fun)
    return float(grid[k]), float(vals[k])


def optimal_coupling(spin, B, transition=-1):
    """Angle in (0, pi/2) maximising |G_theta|, analytic and exact."""
    if not B > 0:
        raise ValueError("B must be > 0")
    lo, hi = 1e-4, math.pi / 2 - 1e-7
    th_a, g_a = _maximise(lambda t: abs(coupling_G(spin, B, t, transition)), lo, hi)
    th_e, g_e = _maximise(lambda t: abs(exact_coupling_G(spin, B, t, transition)), lo, hi)
    return OptimalCoupling(th_a, g_a, th_e, g_e)


# unit vectors of the four NV axes in the cubic crystal frame
NV_ORIENTATIONS = tuple(
    np.array(v, dtype=float) / math.sqrt(3)
    for v in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
)


def _dip_product(omega, centres, width):
    keep = np.ones_like(omega)
    for w0 in centres:
        keep *= 1.0 - 1.0 / (1.0 + ((omega - w0) / width) ** 2)
    return 1.0 - keep


def _grid(span, n):
    lo, hi = span
    if not hi > lo or n < 2:
        raise ValueError("empty frequency span")
    return np.linspace(lo, hi, n)


def odmr_spectrum(spin, field, contrast=0.2, span=None, n=2001):
    """Normalised photoluminescence versus microwave angular frequency.

    Each ESR line is a Lorentzian dip of half-width Gamma2_star; lines
    combine multiplicatively so coincident lines do not exceed ``contrast``.
    """
    if not 0 <= contrast <= 0.3:
        raise ValueError("contrast must lie in [0, 0.3]")
    eig = exact_eigensystem(spin, field)
    centres = [eig.transition(+1), eig.transition(-1)]
    if span is None:
        pad = 10 * spin.Gamma2_star
        span = (min(centres) - pad, max(centres) + pad)
    omega = _grid(span, n)
    return omega, 1.0 - contrast * _dip_product(omega, centres, spin.Gamma2_star)


def odmr_spectrum_ensemble(spin, B_vector, orientations=NV_ORIENTATIONS, contrast=0.2,
                           span=None, n=4001):
    """Ensemble ODMR: two lines per NV orientation (eight for the four axes)."""
    if not 0 <= contrast <= 0.3:
        raise ValueError("contrast must lie in [0, 0.3]")
    B_vector = np.asarray(B_vector, dtype=float)
    B = float(np.linalg.norm(B_vector))
    centres = []
    for u in orientations:
        u = np.asarray(u, dtype=float) / np.linalg.norm(u)
        cos_t = 0.0 if B == 0 else float(np.clip(B_vector @ u / B, -1, 1))
        eig = exact_eigensystem(spin, FieldConfig(B=B, theta_prime=math.acos(cos_t)))
        centres += [eig.transition(+1), eig.transition(-1)]
    if span is None:
        pad = 10 * spin.Gamma2_star
        span = (min(centres) - pad, max(centres) + pad)
    omega = _grid(span, n)
    return omega, 1.0 - contrast * _dip_product(omega, centres, spin.Gamma2_star), centres


def _check(name, big, small, factor):
    ratio = math.inf if small == 0 else big / small
    return Check(name, ratio, factor, ratio >= factor)


def validity_report(spin, field, mode=None, factor=10.0):
    """Evaluate each modelling assumption as ``big / small >= factor``."""
    a = spin.gamma_e * field.B
    th = field.theta_prime
    checks = [
        _check("gamma_e B << D", spin.D, a, factor),
        _check("sin^2 theta' << cos theta'", math.cos(th), math.sin(th) ** 2, factor),
        _check("Omega << gamma_e B", a, field.Omega, factor),
        _check("gamma_las/2 << Gamma2*", spin.Gamma2_star, spin.gamma_las / 2, factor),
        _check("T1 >> 1/gamma_las", spin.T1, 1.0 / spin.gamma_las, factor),
    ]
    if mode is not None:
        kT = K_B * mode.T_bath
        checks += [
            _check("kT >> hbar omega0", kT, HBAR * mode.omega0, factor),
            _check("Gamma2* >> omega0 (adiabatic)", spin.Gamma2_star, mode.omega0, factor),
        ]
        if mode.kind == "librational":
            checks += [
                _check("sqrt(kT I) >> hbar N", math.sqrt(kT * mode.inertia), HBAR * spin.N, factor),
                _check("K_t >= 10 kT", mode.rigidity, 10 * kT, 1.0),
            ]
    return checks
