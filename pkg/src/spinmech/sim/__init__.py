"""Time-domain simulation of the coupled spin / oscillator system.

The stepper is compiled with Cython when available; set
``SPINMECH_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
from ._backend import BACKEND, step_block
from .analysis import (
    PSD,
    NonStationaryWarning,
    RingdownFit,
    equipartition_temperature,
    fit_lorentzian,
    ringdown_fit,
    welch_psd,
)
from .engine import (
    SPIN_MODELS,
    PopulationBoundError,
    SimConfig,
    SimulationDivergence,
    Trajectory,
    simulate,
    simulate_ensemble,
)

__all__ = [
    "BACKEND",
    "step_block",
    "SPIN_MODELS",
    "SimConfig",
    "Trajectory",
    "SimulationDivergence",
    "PopulationBoundError",
    "simulate",
    "simulate_ensemble",
    "PSD",
    "RingdownFit",
    "NonStationaryWarning",
    "welch_psd",
    "fit_lorentzian",
    "ringdown_fit",
    "equipartition_temperature",
]
