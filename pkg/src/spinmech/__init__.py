"""Spin-mechanics of NV centre ensembles embedded in levitated particles.

Submodules:

    nv             spin Hamiltonian, eigenstructure, couplings, ODMR, validity checks
    mechanics      harmonic modes, thermal bath, gas damping
    spin_dynamics  driven two-level spin, static torque, equilibria and bistability
    backaction     spin rigidity, spring shift, cooling / heating
    sensing        static spin torques and forces, thermal detection limits
    sim            stochastic time-domain simulation and its analysis
    cli            config-driven command line front end
"""
from .backaction import analyze
from .mechanics import MechanicalMode
from .nv import FieldConfig, SpinSystem
from .spin_dynamics import Drive

__version__ = "0.1.0"

__all__ = ["SpinSystem", "FieldConfig", "MechanicalMode", "Drive", "analyze", "__version__"]
