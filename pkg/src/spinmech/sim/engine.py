"""Stochastic integration of one mechanical mode driven by the spin torque.

Scheme per step (BAOAB-like splitting):

    B  half kick with trap and spin torque -hbar N G rho11 / inertia
    A  half drift
    S  spin step at the mid-step coordinate (exact exponential)
    O  exact Ornstein-Uhlenbeck velocity update, v <- c v + sqrt((1-c^2) kT/I) xi
    A  half drift
    B  half kick

With the spin off the O step makes the thermal variance exact at any dt
up to the O(dt^2) bias of the drift/kick part. The full-Bloch spin step
is a Strang split: half population relaxation with the coherence frozen,
an exact coherence step with the population frozen, then the other half.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..constants import HBAR, K_B
from ..mechanics import MechanicalMode
from ..nv import FieldConfig, SpinSystem
from ..spin_dynamics import Drive, steady_population
from ._backend import step_block

__all__ = [
    "SPIN_MODELS",
    "SimConfig",
    "Trajectory",
    "SimulationDivergence",
    "PopulationBoundError",
    "simulate",
    "simulate_ensemble",
]

SPIN_MODELS = ("off", "adiabatic", "full-bloch")
_MODEL_CODE = {"off": 0.0, "adiabatic": 1.0, "full-bloch": 2.0}
_CHUNK = 1 << 16
DT_FRACTION = 0.05


class SimulationDivergence(ArithmeticError):
    """Integration produced a non-finite state.

    ``last_valid`` is the index of the last completed step and ``trajectory``
    holds the rows recorded before the failure.
    """

    def __init__(self, msg, last_valid, trajectory=None):
        super().__init__(msg)
        self.last_valid = last_valid
        self.trajectory = trajectory


class PopulationBoundError(SimulationDivergence):
    """rho11 left [0, 1] by more than the tolerance."""


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one trajectory.

    ``drive`` overrides the drive derived from ``field``; ``member`` selects
    an independent noise stream for ensemble runs with the same ``seed``.
    Initial spin state defaults to the steady state at ``x0``. With
    ``thermal_start`` the mechanical state is drawn from the bath
    distribution around (x0, v0) using the first two normals of the stream.
    """

    mode: MechanicalMode
    spin: SpinSystem
    field: FieldConfig = field(default_factory=FieldConfig)
    spin_model: str = "adiabatic"
    dt: float = 1e-6
    duration: float = 1e-2
    seed: int = 0
    stride: int = 1
    transition: int = -1
    drive: Drive | None = None
    x0: float = 0.0
    v0: float = 0.0
    rho11_0: float | None = None
    rho10_0: complex | None = None
    member: int = 0
    thermal_start: bool = False
    check_dt: bool = True

    def __post_init__(self):
        if self.spin_model not in SPIN_MODELS:
            raise ValueError(f"spin_model must be one of {SPIN_MODELS}")
        if not self.dt > 0 or not self.duration > 0:
            raise ValueError("dt and duration must be positive")
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError("stride must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.n_steps < self.stride:
            raise ValueError("duration shorter than one recorded sample")
        if self.check_dt and self.dt > self.max_dt() * (1 + 1e-12):
            raise ValueError(f"dt={self.dt:.3g} s exceeds the stability limit {self.max_dt():.3g} s")

    def resolved_drive(self):
        if self.drive is not None:
            return self.drive
        return Drive.from_field(self.spin, self.field, self.mode, self.transition)

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def spin_time(self):
        """Shortest population relaxation time 1 / (gamma_las + Omega^2 / Gamma2*)."""
        W = self.resolved_drive().Omega
        return 1.0 / (self.spin.gamma_las + W * W / self.spin.Gamma2_star)

    def max_dt(self):
        """Largest admissible step for the chosen spin model."""
        limits = [DT_FRACTION / self.mode.omega0]
        if self.spin_model != "off":
            limits.append(DT_FRACTION * self.spin_time())
        if self.spin_model == "full-bloch":
            limits += [DT_FRACTION / self.spin.Gamma2_star, DT_FRACTION / self.spin.gamma_las]
        return min(limits)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    rho11: np.ndarray
    rho10: np.ndarray | None
    dt: float
    stride: int
    config: SimConfig | None = None

    @property
    def sample_dt(self):
        return self.dt * self.stride

    def __len__(self):
        return len(self.t)

    def to_array(self):
        """Columns t, x, v, rho11 (and Re, Im rho10 for full-Bloch runs)."""
        cols = [self.t, self.x, self.v, self.rho11]
        if self.rho10 is not None:
            cols += [self.rho10.real, self.rho10.imag]
        return np.column_stack(cols)


def _initial_spin(cfg, drive, x0):
    if cfg.spin_model == "off":
        return 0.0, 0.0j
    g2, gl = cfg.spin.Gamma2_star, cfg.spin.gamma_las
    d = drive.Delta - drive.G * x0
    r11 = steady_population(d, drive.Omega, g2, gl) if cfg.rho11_0 is None else cfg.rho11_0
    if cfg.rho10_0 is not None:
        r10 = complex(cfg.rho10_0)
    else:
        # coherence slaved to rho11: d rho10/dt = 0
        r10 = -0.5j * drive.Omega * (2 * r11 - 1) / complex(-g2, d)
    return float(r11), r10


def _params(cfg, drive):
    m = cfg.mode
    c = math.exp(-m.gamma * cfg.dt)
    sig = math.sqrt(max(1.0 - c * c, 0.0) * K_B * m.T_bath / m.inertia)
    on = cfg.spin_model != "off"
    kappa = -HBAR * cfg.spin.N * drive.G / m.inertia if on else 0.0
    return np.array([
        cfg.dt, m.omega0**2, c, sig, kappa,
        drive.G, drive.Delta, drive.Omega,
        cfg.spin.Gamma2_star, cfg.spin.gamma_las, _MODEL_CODE[cfg.spin_model],
    ], dtype=float)


def _rng(cfg):
    return np.random.Generator(np.random.Philox(key=np.array([cfg.seed, cfg.member], dtype=np.uint64)))


def simulate(cfg):
    """Integrate ``cfg`` and return the recorded :class:`Trajectory`.

    Deterministic for fixed (seed, member, dt). Raises
    :class:`SimulationDivergence` or :class:`PopulationBoundError` with the
    partial trajectory attached.
    """
    drive = cfg.resolved_drive()
    n, stride = cfg.n_steps, int(cfg.stride)
    rows = n // stride
    out = np.empty((rows, 5), dtype=float)
    rng = _rng(cfg)
    x0, v0 = cfg.x0, cfg.v0
    if cfg.thermal_start:
        kT = K_B * cfg.mode.T_bath
        xi = rng.standard_normal(2)
        x0 += math.sqrt(kT / cfg.mode.rigidity) * xi[0]
        v0 += math.sqrt(kT / cfg.mode.inertia) * xi[1]
    r11, r10 = _initial_spin(cfg, drive, x0)
    state = np.array([x0, v0, r11, r10.real, r10.imag], dtype=float)
    params = _params(cfg, drive)
    step, row = 0, 0
    while step < n:
        m = min(_CHUNK, n - step)
        noise = rng.standard_normal(m)
        status, done, written = step_block(state, params, noise, stride, step, out, row)
        row += written
        if status:
            last = step + done - 1
            traj = _wrap(cfg, out[:row], stride)
            kind = PopulationBoundError if status == 2 else SimulationDivergence
            what = "population left [0, 1]" if status == 2 else "non-finite state"
            raise kind(f"{what} at step {last + 1}", last, traj)
        step += m
    return _wrap(cfg, out[:row], stride)


def _wrap(cfg, out, stride):
    t = (np.arange(len(out)) + 1) * stride * cfg.dt
    rho10 = out[:, 3] + 1j * out[:, 4] if cfg.spin_model == "full-bloch" else None
    return Trajectory(t=t, x=out[:, 0].copy(), v=out[:, 1].copy(), rho11=out[:, 2].copy(),
                      rho10=rho10, dt=cfg.dt, stride=stride, config=cfg)


def simulate_ensemble(cfg, members, workers=1):
    """Run ``members`` independent noise streams of ``cfg``.

    Members are numbered from ``cfg.member`` upwards, so consecutive
    batches extend one ensemble. Results are ordered by member index and
    do not depend on ``workers``.
    """
    cfgs = [replace(cfg, member=cfg.member + k) for k in range(members)]
    if workers <= 1:
        return [simulate(c) for c in cfgs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(simulate, cfgs))
