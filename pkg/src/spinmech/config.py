"""Run configuration: INI file with unit-suffixed keys.

Every physical key names its unit (``B_gauss``, ``omega0_kHz``...).
Frequency keys are ordinary frequencies and are converted to rad/s.
Unknown keys are rejected and all missing required keys are reported in
one error. Missing optional keys take the defaults below; ``None``
defaults mean "derive from other keys".
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import GAUSS, TWO_PI
from .mechanics import MechanicalMode, damping_from_pressure, inertia_sphere
from .nv import FieldConfig, SpinSystem, analytic_frequencies

__all__ = ["ConfigError", "RunConfig", "Objects", "SCHEMA", "REQUIRED", "load_config",
           "parse_config", "sweep_points", "build_objects"]

_MHZ = TWO_PI * 1e6
_KHZ = TWO_PI * 1e3
_GHZ = TWO_PI * 1e9
_REQ = object()  # marker for keys without a default


class ConfigError(ValueError):
    """Invalid run configuration."""


# section -> key -> (kind, default, SI factor); kind is "float", "int" or "str"
SCHEMA = {
    "spin": {
        "D_GHz": ("float", 2.88, _GHZ),
        "gamma_e_GHz_per_T": ("float", 28.0249, _GHZ),
        "Gamma2_star_MHz": ("float", 5.0, _MHZ),
        "gamma_las_kHz": ("float", 10.0, _KHZ),
        "N": ("float", 1e9, 1.0),
        "T1_ms": ("float", 1.0, 1e-3),
    },
    "field": {
        "B_gauss": ("float", 50.0, GAUSS),
        "theta_deg": ("float", 10.0, math.pi / 180),
        "dBz_dz_T_per_m": ("float", 0.0, 1.0),
    },
    "drive": {
        "Omega_MHz": ("float", 1.0, _MHZ),
        # detuning from the chosen transition at the trap centre; omega_mw_GHz overrides it
        "detuning_MHz": ("float", -5.0, _MHZ),
        "omega_mw_GHz": ("float", None, _GHZ),
        "transition": ("int", -1, 1),
        # equilibrium model; the equilibria command needs it stated explicitly
        "model": ("str", _REQ, None),
    },
    "mode": {
        "kind": ("str", "librational", None),
        "omega0_kHz": ("float", 1.0, _KHZ),
        "temperature_K": ("float", 300.0, 1.0),
        "diameter_um": ("float", 15.0, 1e-6),
        "density_kg_per_m3": ("float", 3500.0, 1.0),
        "inertia_SI": ("float", None, 1.0),  # kg m^2 or kg; overrides the sphere
        "pressure_mbar": ("float", 0.1, 100.0),
        "gamma_per_s": ("float", None, 1.0),  # overrides the pressure model
    },
    "sim": {
        "spin_model": ("str", "adiabatic", None),
        "duration_s": ("float", _REQ, 1.0),
        "dt_s": ("float", None, 1.0),
        "stride": ("int", 1, 1),
        "members": ("int", 1, 1),
        "seed": ("int", 0, 1),
        "root": ("int", None, 1),
        "x0_offset_SI": ("float", 0.0, 1.0),
        "thermal_start": ("int", 1, 1),
        "odmr_points": ("int", 2001, 1),
        "odmr_contrast": ("float", 0.2, 1.0),
    },
    "sweep": {
        "key": ("str", _REQ, None),
        "start": ("float", _REQ, 1.0),
        "stop": ("float", _REQ, 1.0),
        "num": ("int", _REQ, 1),
        "key2": ("str", None, None),
        "start2": ("float", None, 1.0),
        "stop2": ("float", None, 1.0),
        "num2": ("int", None, 1),
    },
}

# keys required only by some subcommands
REQUIRED = {"simulate": [("sim", "duration_s")], "equilibria": [("drive", "model")]}

_CHOICES = {
    ("drive", "model"): ("saturated", "dispersive"),
    ("mode", "kind"): ("librational", "translational"),
    ("sim", "spin_model"): ("off", "adiabatic", "full-bloch"),
    ("drive", "transition"): (1, -1),
    ("sim", "thermal_start"): (0, 1),
}


@dataclass
class RunConfig:
    """Parsed values in file units, keyed ``values[section][key]``."""

    values: dict = field(default_factory=dict)
    sweep: dict | None = None

    def get(self, section, key):
        return self.values[section][key]

    def si(self, section, key):
        kind, _, factor = SCHEMA[section][key]
        v = self.values[section][key]
        return v if v is None or factor is None else v * factor

    def with_value(self, dotted, value):
        sec, key = _split_key(dotted)
        vals = {s: dict(d) for s, d in self.values.items()}
        kind = SCHEMA[sec][key][0]
        vals[sec][key] = int(round(value)) if kind == "int" else float(value)
        return RunConfig(vals, self.sweep)

    def semantic(self):
        """Resolved keys that define the computation (seed excluded)."""
        out = {s: {k: v for k, v in d.items() if v is not None}
               for s, d in self.values.items()}
        out["sim"].pop("seed", None)
        if self.sweep:
            out["sweep"] = {k: v for k, v in self.sweep.items() if v is not None}
        return out

    def hash(self):
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _split_key(dotted):
    if "." not in dotted:
        raise ConfigError(f"sweep key {dotted!r} must look like section.key")
    sec, key = dotted.split(".", 1)
    if sec not in SCHEMA or sec == "sweep" or key not in SCHEMA[sec]:
        raise ConfigError(f"unknown sweep key {dotted!r}")
    if SCHEMA[sec][key][0] == "str":
        raise ConfigError(f"sweep key {dotted!r} is not numeric")
    return sec, key


def _convert(kind, raw, where):
    try:
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "int":
            return int(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind}") from None
    return raw.strip()


def parse_config(text="", command=None):
    """Parse INI text into a RunConfig, applying defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case sensitive (Gamma2 vs gamma)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    problems, missing = [], []
    for sec in cp.sections():
        if sec not in SCHEMA:
            problems.append(f"unknown section [{sec}]")
            continue
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                problems.append(f"unknown key {sec}.{key}")
    values = {}
    for sec, keys in SCHEMA.items():
        if sec == "sweep":
            continue
        values[sec] = {}
        for key, (kind, default, _) in keys.items():
            if cp.has_option(sec, key):
                try:
                    values[sec][key] = _convert(kind, cp[sec][key], f"{sec}.{key}")
                except ConfigError as exc:
                    problems.append(str(exc))
                    values[sec][key] = None
            elif default is _REQ:
                values[sec][key] = None
                if command is not None and (sec, key) in REQUIRED.get(command, []):
                    missing.append(f"{sec}.{key}")
            else:
                values[sec][key] = default
    sweep = None
    if cp.has_section("sweep"):
        sweep = {}
        for key, (kind, default, _) in SCHEMA["sweep"].items():
            if cp.has_option("sweep", key):
                try:
                    sweep[key] = _convert(kind, cp["sweep"][key], f"sweep.{key}")
                except ConfigError as exc:
                    problems.append(str(exc))
            elif default is _REQ:
                missing.append(f"sweep.{key}")
            else:
                sweep[key] = None
        if sweep.get("key2") is not None:
            missing += [f"sweep.{k}" for k in ("start2", "stop2", "num2") if sweep.get(k) is None]
    if missing:
        problems.append("missing required keys: " + ", ".join(missing))
    for (sec, key), allowed in _CHOICES.items():
        v = values[sec][key]
        if v is not None and v not in allowed:
            problems.append(f"{sec}.{key} must be one of {allowed}, got {v!r}")
    if sweep and not problems:
        for k in ("key", "key2"):
            if sweep.get(k) is not None:
                try:
                    _split_key(sweep[k])
                except ConfigError as exc:
                    problems.append(str(exc))
        for k in ("num", "num2"):
            if sweep.get(k) is not None and sweep[k] < 1:
                problems.append(f"sweep.{k} must be >= 1")
    if problems:
        raise ConfigError("; ".join(problems))
    return RunConfig(values, sweep)


def load_config(path=None, command=None):
    if path is None:
        return parse_config("", command)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, command)


def sweep_points(cfg):
    """Grid points as lists of (dotted key, value), in row-major grid order."""
    sw = cfg.sweep
    if not sw:
        return [[]]
    axes = [(sw["key"], np.linspace(sw["start"], sw["stop"], sw["num"]))]
    if sw.get("key2") is not None:
        axes.append((sw["key2"], np.linspace(sw["start2"], sw["stop2"], sw["num2"])))
    pts = [[(axes[0][0], float(v))] for v in axes[0][1]]
    if len(axes) == 2:
        pts = [p + [(axes[1][0], float(v))] for p in pts for v in axes[1][1]]
    return pts


@dataclass(frozen=True)
class Objects:
    spin: SpinSystem
    field: FieldConfig
    mode: MechanicalMode
    transition: int
    model: str


def build_objects(cfg):
    """Domain objects from a RunConfig; invalid values raise ConfigError."""
    try:
        spin = SpinSystem(
            D=cfg.si("spin", "D_GHz"),
            gamma_e=cfg.si("spin", "gamma_e_GHz_per_T"),
            Gamma2_star=cfg.si("spin", "Gamma2_star_MHz"),
            gamma_las=cfg.si("spin", "gamma_las_kHz"),
            N=cfg.si("spin", "N"),
            T1=cfg.si("spin", "T1_ms"),
        )
        kind = cfg.get("mode", "kind")
        T = cfg.si("mode", "temperature_K")
        inertia = cfg.si("mode", "inertia_SI")
        d = cfg.si("mode", "diameter_um")
        rho = cfg.si("mode", "density_kg_per_m3")
        if inertia is None:
            m, I = inertia_sphere(rho, d)
            inertia = I if kind == "librational" else m
        gamma = cfg.si("mode", "gamma_per_s")
        if gamma is None:
            gamma = damping_from_pressure(cfg.si("mode", "pressure_mbar"), max(T, 1e-3), d, rho,
                                          kind=kind)
        mode = MechanicalMode(kind, inertia, cfg.si("mode", "omega0_kHz"), gamma, T)
        transition = cfg.get("drive", "transition")
        field0 = FieldConfig(
            B=cfg.si("field", "B_gauss"),
            theta_prime=cfg.si("field", "theta_deg"),
            dBz_dz=cfg.si("field", "dBz_dz_T_per_m"),
            Omega=cfg.si("drive", "Omega_MHz"),
        )
        w_mw = cfg.si("drive", "omega_mw_GHz")
        if w_mw is None:
            wp, w0, wm = analytic_frequencies(spin, field0)
            w_t = (wp if transition == 1 else wm) - w0
            w_mw = w_t + cfg.si("drive", "detuning_MHz")
        field1 = FieldConfig(B=field0.B, theta_prime=field0.theta_prime, dBz_dz=field0.dBz_dz,
                             Omega=field0.Omega, omega_mw=w_mw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return Objects(spin, field1, mode, transition, cfg.get("drive", "model"))
