import math
import os
import subprocess
import sys
import warnings

import numpy as np
import pytest

from spinmech.backaction import adiabatic_rigidity, analyze, spectral_temperature
from spinmech.constants import K_B, TWO_PI
from spinmech.mechanics import MechanicalMode
from spinmech.nv import SpinSystem
from spinmech.presets import cooling_setup
from spinmech.sim import (
    NonStationaryWarning,
    PopulationBoundError,
    SimConfig,
    SimulationDivergence,
    equipartition_temperature,
    fit_lorentzian,
    ringdown_fit,
    simulate,
    simulate_ensemble,
    welch_psd,
)
from spinmech.sim import _pykernel

W0 = TWO_PI * 1e3


def thermal_mode(T=300.0, Q=50.0):
    return MechanicalMode("librational", 1.39e-22, W0, W0 / Q, T)


def spin_off(mode, duration, dt=None, **kw):
    dt = 0.025 / mode.omega0 if dt is None else dt
    return SimConfig(mode=mode, spin=SpinSystem(), spin_model="off", dt=dt,
                     duration=duration, **kw)


def _ringdown(setup, model, dt_factor=0.5, cycles=None):
    """T = 0 free decay around the static equilibrium of a cooling setup."""
    mode = setup.mode
    g_t = analyze(setup.spin, setup.drive, mode, setup.delta_bar).gamma_tilde
    amp = 0.02 * setup.spin.Gamma2_star / abs(setup.drive.G)
    probe = SimConfig(mode=mode, spin=setup.spin, spin_model=model, drive=setup.drive,
                      dt=1e-9, duration=1e-3, check_dt=False)
    dt = dt_factor * probe.max_dt()
    cfg = SimConfig(mode=mode, spin=setup.spin, spin_model=model, drive=setup.drive, dt=dt,
                    duration=8.0 / g_t, x0=setup.x0 + amp, stride=max(1, int(2e-6 / dt)))
    tr = simulate(cfg)
    tr.x -= setup.x0
    return ringdown_fit(tr, omega_guess=mode.omega0, floor=1e-3)


# ---------------------------------------------------------------- baselines

def test_spin_off_equipartition():
    mode = thermal_mode()
    cfg = spin_off(mode, 400 / mode.gamma, seed=1, thermal_start=True, stride=4)
    trajs = simulate_ensemble(cfg, 8)
    T = equipartition_temperature(trajs, mode)
    assert T == pytest.approx(300.0, rel=0.10)
    # one standard error of the pooled estimate is ~2.5 %; stay within 3 of them
    assert abs(T / 300 - 1) < 0.075


def test_spin_off_ringdown_at_zero_temperature():
    mode = thermal_mode(T=0.0, Q=20.0)
    cfg = spin_off(mode, 10 / mode.gamma, x0=1e-3)
    fit = ringdown_fit(simulate(cfg))
    assert fit.gamma == pytest.approx(mode.gamma, rel=0.02)
    assert fit.omega == pytest.approx(math.sqrt(W0**2 - mode.gamma**2 / 4), rel=1e-3)
    assert fit.amplitude == pytest.approx(1e-3, rel=0.02)


def test_zero_temperature_is_deterministic_and_noise_free():
    mode = thermal_mode(T=0.0)
    tr = simulate(spin_off(mode, 0.01))
    assert np.all(tr.x == 0.0) and np.all(tr.v == 0.0)


# ---------------------------------------------------------------- spectra

def test_white_noise_level():
    rng = np.random.default_rng(0)
    sigma, dt = 0.7, 1e-4
    psd = welch_psd(rng.normal(0, sigma, 2**20), nperseg=4096, dt=dt)
    level = np.mean(psd.S[5:-5])
    assert level == pytest.approx(sigma**2 * dt, rel=0.05)
    assert np.all(np.abs(psd.S[5:-5] / level - 1) < 0.5)


def test_sinusoid_peak():
    dt, f = 1e-4, 123.0
    t = np.arange(2**16) * dt
    psd = welch_psd(np.sin(TWO_PI * f * t), nperseg=8192, dt=dt)
    k = int(np.argmax(psd.S))
    assert abs(psd.omega[k] - TWO_PI * f) <= psd.omega[1] - psd.omega[0]


def test_parseval_on_thermal_record():
    mode = thermal_mode()
    tr = simulate(spin_off(mode, 200 / mode.gamma, seed=3, thermal_start=True, stride=4))
    psd = welch_psd(tr, nperseg=2**14)
    x = tr.x
    # Welch removes each segment's mean, so compare with the segment-averaged variance
    step = 2**13
    segs = [x[i:i + 2**14] for i in range(0, len(x) - 2**14 + 1, step)]
    var = np.mean([np.var(s) for s in segs])
    assert psd.variance() == pytest.approx(var, rel=0.02)


def test_welch_needs_eight_segments():
    with pytest.raises(ValueError):
        welch_psd(np.zeros(100), nperseg=64, dt=1.0)


def test_lorentzian_fit_recovers_analytic_spectrum():
    from spinmech.backaction import psd as model_psd
    from spinmech.sim import PSD
    mode = thermal_mode()
    w = np.linspace(0, 3 * W0, 30001)
    S = model_psd(mode, 0.0, np.maximum(w, 1e-9))
    fit = fit_lorentzian(PSD(w, S, 8))
    assert fit.omega == pytest.approx(W0, rel=1e-6)
    assert fit.gamma == pytest.approx(mode.gamma, rel=1e-6)


# ---------------------------------------------------------------- spin coupling

def test_full_bloch_agrees_with_adiabatic():
    s = cooling_setup("red", T_bath=0.0)
    a = _ringdown(s, "adiabatic")
    b = _ringdown(s, "full-bloch")
    assert b.gamma == pytest.approx(a.gamma, rel=0.05)
    assert b.omega == pytest.approx(a.omega, rel=0.05)
    g_t = analyze(s.spin, s.drive, s.mode, s.delta_bar).gamma_tilde
    assert a.gamma == pytest.approx(g_t, rel=0.05)


@pytest.mark.filterwarnings("ignore::spinmech.sim.NonStationaryWarning")  # 3 sigma, 32 records
@pytest.mark.parametrize("detuning", ["red", "blue"])
def test_stochastic_consistency_32_seeds(detuning):
    s = cooling_setup(detuning)
    res = analyze(s.spin, s.drive, s.mode, s.delta_bar)
    ks = lambda w: adiabatic_rigidity(s.spin, s.drive, s.delta_bar, w)  # noqa: E731
    T_pred = spectral_temperature(s.mode, ks)
    probe = SimConfig(mode=s.mode, spin=s.spin, spin_model="adiabatic", drive=s.drive,
                      dt=1e-9, duration=1e-3, check_dt=False)
    cfg = SimConfig(mode=s.mode, spin=s.spin, spin_model="adiabatic", drive=s.drive,
                    dt=0.5 * probe.max_dt(), duration=1000 / s.mode.gamma, x0=s.x0,
                    thermal_start=True, stride=8, seed=2718)
    per = np.array([equipartition_temperature(tr, s.mode, omega=res.omega_tilde)
                    for tr in simulate_ensemble(cfg, 32)])
    se = per.std(ddof=1) / math.sqrt(len(per))
    assert abs(per.mean() - T_pred) <= 2 * se
    # T_pred and the closed form T_f differ by O(gamma_tilde / omega_tilde)
    assert T_pred == pytest.approx(res.T_f, rel=2 * res.gamma_tilde / res.omega_tilde)


@pytest.mark.parametrize("model", ["adiabatic", "full-bloch"])
def test_halving_dt_converged(model):
    s = cooling_setup("blue", T_bath=0.0)
    a = _ringdown(s, model, dt_factor=0.5)
    b = _ringdown(s, model, dt_factor=0.25)
    assert b.gamma == pytest.approx(a.gamma, rel=0.01)
    assert b.omega == pytest.approx(a.omega, rel=0.01)


def test_population_stays_physical():
    s = cooling_setup("red")
    cfg = SimConfig(mode=s.mode, spin=s.spin, spin_model="full-bloch", drive=s.drive,
                    dt=2e-8, duration=2e-3, x0=s.x0, thermal_start=True, stride=7)
    tr = simulate(cfg)
    assert np.all((tr.rho11 >= 0) & (tr.rho11 <= 1))
    # positivity of the 2x2 density matrix
    assert np.all(np.abs(tr.rho10) ** 2 <= tr.rho11 * (1 - tr.rho11) + 1e-9)


# ---------------------------------------------------------------- config and errors

def test_trajectory_shape_and_time_grid():
    mode = thermal_mode()
    cfg = spin_off(mode, 0.01, dt=5e-6, stride=7)
    tr = simulate(cfg)
    assert len(tr) == cfg.n_steps // 7 == 285
    assert tr.t[0] == pytest.approx(3.5e-5) and tr.sample_dt == pytest.approx(3.5e-5)
    assert tr.rho10 is None and tr.to_array().shape == (285, 4)


def test_dt_limits():
    mode = thermal_mode()
    with pytest.raises(ValueError):
        spin_off(mode, 0.1, dt=0.06 / W0)
    s = cooling_setup("red")
    base = dict(mode=s.mode, spin=s.spin, drive=s.drive, duration=1e-3)
    ad = SimConfig(spin_model="adiabatic", dt=1e-7, **base)
    fb = SimConfig(spin_model="full-bloch", dt=1e-9, **base)
    assert ad.max_dt() == pytest.approx(0.05 * min(1 / W0, ad.spin_time()))
    assert fb.max_dt() == pytest.approx(0.05 / s.spin.Gamma2_star)
    with pytest.raises(ValueError):
        SimConfig(spin_model="full-bloch", dt=1e-7, **base)


def test_config_validation():
    mode = thermal_mode()
    with pytest.raises(ValueError):
        spin_off(mode, 0.1, seed=2**64)
    with pytest.raises(ValueError):
        spin_off(mode, 1e-6, dt=1e-5)
    with pytest.raises(ValueError):
        SimConfig(mode=mode, spin=SpinSystem(), spin_model="quantum")


def test_divergence_reports_last_valid_step():
    mode = thermal_mode(T=0.0)
    cfg = spin_off(mode, 0.01, x0=1e308)  # w0^2 x overflows
    with pytest.raises(SimulationDivergence) as err:
        simulate(cfg)
    assert not isinstance(err.value, PopulationBoundError)
    assert err.value.last_valid >= -1
    assert np.all(np.isfinite(err.value.trajectory.x))


def test_population_violation_aborts():
    s = cooling_setup("red")
    cfg = SimConfig(mode=s.mode, spin=s.spin, spin_model="adiabatic", drive=s.drive,
                    dt=1e-6, duration=1e-3, rho11_0=1.5)
    with pytest.raises(PopulationBoundError) as err:
        simulate(cfg)
    assert err.value.last_valid == -1


# ---------------------------------------------------------------- determinism

def test_ensemble_independent_of_workers():
    mode = thermal_mode()
    cfg = spin_off(mode, 0.05, seed=42, thermal_start=True)
    a = simulate_ensemble(cfg, 4, workers=1)
    b = simulate_ensemble(cfg, 4, workers=4)
    for u, v in zip(a, b):
        assert np.array_equal(u.to_array(), v.to_array())
    assert not np.array_equal(a[0].x, a[1].x)


def test_seed_changes_stream():
    mode = thermal_mode()
    a = simulate(spin_off(mode, 0.01, seed=1))
    b = simulate(spin_off(mode, 0.01, seed=2))
    c = simulate(spin_off(mode, 0.01, seed=1))
    assert not np.array_equal(a.x, b.x)
    assert np.array_equal(a.x, c.x)


@pytest.mark.parametrize("model", [0.0, 1.0, 2.0])
def test_backends_bit_identical(model):
    from spinmech.sim import _backend
    if _backend.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    from spinmech.sim import _kernel
    rng = np.random.default_rng(1)
    n = 20000
    noise = rng.standard_normal(n)
    p = np.array([2e-8, W0**2, 0.9999, 1e-6, -1e-3 if model else 0.0, 3e7, -1e6,
                  2e6 if model else 0.0, 1.2e6, 3e3, model])
    outs = []
    for fn in (_kernel.step_block, _pykernel.step_block):
        state = np.array([1e-4, 0.0, 0.2, 0.01, -0.02])
        out = np.zeros((n // 3, 5))
        res = fn(state, p, noise, 3, 0, out, 0)
        outs.append((res, state.copy(), out))
    (r1, s1, o1), (r2, s2, o2) = outs
    assert r1 == r2
    assert np.array_equal(s1, s2)
    assert np.array_equal(o1, o2)


def test_pure_python_fallback_selected_by_env():
    code = ("import spinmech.sim as s, math;"
            "from spinmech.sim import SimConfig, simulate;"
            "from spinmech.mechanics import MechanicalMode;"
            "from spinmech.nv import SpinSystem;"
            "m = MechanicalMode('librational', 1.39e-22, 2*math.pi*1e3, 100.0);"
            "c = SimConfig(mode=m, spin=SpinSystem(), spin_model='off', dt=2e-6, duration=2e-3, seed=5);"
            "print(s.BACKEND, repr(float(simulate(c).x[-1])))")
    env = dict(os.environ, SPINMECH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out[0] == "python"
    env["SPINMECH_PURE_PYTHON"] = "0"
    out2 = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                          check=True).stdout.split()
    assert out2[1] == out[1]


# ---------------------------------------------------------------- analysis helpers

def test_nonstationary_warning():
    class Rec:
        x = np.concatenate([np.random.default_rng(0).normal(0, 1, 5000),
                            np.random.default_rng(1).normal(0, 3, 5000)])
    with pytest.warns(NonStationaryWarning):
        equipartition_temperature(Rec(), thermal_mode())


def test_equipartition_temperature_formula():
    class Rec:
        x = np.array([1.0, -1.0] * 50) * 1e-3
    mode = thermal_mode()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        T = equipartition_temperature(Rec(), mode)
    assert T == pytest.approx(mode.inertia * W0**2 * 1e-6 / K_B, rel=1e-12)
