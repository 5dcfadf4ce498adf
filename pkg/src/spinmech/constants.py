"""Physical constants and unit helpers.

Everything inside the package is SI with angular frequencies in rad/s.
The helpers here are only used at the boundaries (CLI, reports).
"""
import math

from scipy import constants as _c

HBAR = _c.hbar
K_B = _c.k
AMU = _c.atomic_mass
TWO_PI = 2.0 * math.pi

#: Free-electron gyromagnetic ratio in rad s^-1 T^-1 (28.0249 GHz/T).
GAMMA_E = TWO_PI * 28.0249e9
#: NV ground-state zero-field splitting, rad/s.
D_NV = TWO_PI * 2.88e9
#: Mean molecular mass of dry air, kg.
AIR_MASS = 28.97 * AMU

GAUSS = 1e-4  # tesla


def hz_to_rad(f):
    return TWO_PI * f


def rad_to_hz(w):
    return w / TWO_PI


def gauss_to_tesla(b):
    return b * GAUSS
