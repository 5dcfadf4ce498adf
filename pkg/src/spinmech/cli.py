"""Command line front end: config-driven runs writing CSV tables and a JSON summary.

    spinmech <command> [-c run.ini] [--out DIR] [--seed N] [--strict]
                       [--reproducible] [--workers N]

Commands: odmr, coupling, equilibria, backaction, sensitivity, simulate,
validate. Exit codes: 0 success, 1 invalid config (or failed validity
check under --strict), 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import resources

import numpy as np

from . import __version__
from .backaction import analyze
from .config import ConfigError, build_objects, load_config, sweep_points
from .mechanics import stability_check, thermal_std
from .nv import (
    LabelingError,
    coupling_constants,
    exact_eigensystem,
    odmr_spectrum,
    optimal_coupling,
    validity_report,
)
from .sensing import integration_time, min_force, min_torque, static_spin_force, static_spin_torque
from .sim import (
    SimConfig,
    equipartition_temperature,
    fit_lorentzian,
    simulate,
    welch_psd,
)
from .spin_dynamics import Drive, equilibria, operating_point

COMMANDS = ("odmr", "coupling", "equilibria", "backaction", "sensitivity", "simulate", "validate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(ArithmeticError):
    """Raised after outputs are written when a result is physically unstable."""


def load_schema():
    text = resources.files("spinmech").joinpath("data/csv_schema.json").read_text("utf-8")
    return json.loads(text)["tables"]


# ---------------------------------------------------------------- commands
# Each returns (rows, summary); rows are lists in schema column order.

def _odmr(cfg, obj, ctx):
    omega, pl = odmr_spectrum(obj.spin, obj.field, contrast=cfg.get("sim", "odmr_contrast"),
                              n=cfg.get("sim", "odmr_points"))
    eig = exact_eigensystem(obj.spin, obj.field)
    rows = [[w, p] for w, p in zip(omega.tolist(), pl.tolist())]
    return rows, {"omega_plus": float(eig.transition(+1)), "omega_minus": float(eig.transition(-1))}


def _coupling(cfg, obj, ctx):
    spin, fld = obj.spin, obj.field
    eig = exact_eigensystem(spin, fld)
    cc = coupling_constants(spin, fld)
    gz = spin.gamma_e * fld.dBz_dz
    if fld.B > 0:
        oc = optimal_coupling(spin, fld.B, obj.transition)
        opt = [oc.G_analytic, oc.theta_analytic, oc.G_exact, oc.theta_exact,
               oc.G_exact / (spin.gamma_e * fld.B)]
    else:
        opt = [0.0, math.nan, 0.0, math.nan, math.nan]
    row = [fld.B, fld.theta_prime, float(eig.transition(+1)), float(eig.transition(-1)),
           cc.G_theta(+1), cc.G_theta(-1), gz] + opt
    keys = ["G_plus", "G_minus", "G_z", "G_opt_analytic", "theta_opt_analytic", "G_opt_exact",
            "theta_opt_exact", "G_opt_over_gammaB"]
    return [row], dict(zip(keys, row[4:]))


def _drive(obj):
    return Drive.from_field(obj.spin, obj.field, obj.mode, obj.transition)


def _equilibria(cfg, obj, ctx):
    drive = _drive(obj)
    eq = equilibria(obj.spin, drive, obj.mode, obj.model)
    rows = [[i, r.x, r.stable, r.rho11, r.stiffness, drive.Delta - drive.G * r.x]
            for i, r in enumerate(eq.roots)]
    summary = {
        "model": obj.model,
        "G": drive.G,
        "Delta": drive.Delta,
        "roots": [r.x for r in eq.roots],
        "stable": [r.stable for r in eq.roots],
        "count": eq.count,
        "bistable": eq.bistable,
        "marginal": eq.marginal,
    }
    return rows, summary


def _operating(cfg, obj, drive):
    return operating_point(obj.spin, drive, obj.mode, "saturated", root=cfg.get("sim", "root"))


def _backaction(cfg, obj, ctx):
    drive = _drive(obj)
    db, x0 = _operating(cfg, obj, drive)
    res = analyze(obj.spin, drive, obj.mode, db)
    k = res.K_s_at_omega0
    row = [db, x0, res.Gamma0, res.alpha, res.tau, k.real, k.imag, res.omega_tilde,
           res.gamma_tilde, res.T_f, res.unstable]
    summary = {"delta_bar": db, "x0": x0, "omega_tilde": res.omega_tilde,
               "gamma_tilde": res.gamma_tilde, "T_f": res.T_f, "K_s_re": k.real,
               "K_s_im": k.imag, "unstable": res.unstable}
    if res.unstable:
        ctx["failure"] = f"effective damping {res.gamma_tilde:.3g} <= 0: mode is unstable"
    return [row], summary


def _sensitivity(cfg, obj, ctx):
    mode = obj.mode
    if mode.kind == "librational":
        floor = min_torque(mode)
        static = static_spin_torque(obj.spin, obj.field, state=-1)
        ratio = stability_check(mode).ratio
    else:
        floor = min_force(mode)
        static = static_spin_force(obj.spin, obj.field.dBz_dz, state=+1)
        ratio = math.nan
    t_int = integration_time(mode, abs(static)) if static != 0 else math.inf
    row = [mode.kind, floor, static, t_int, thermal_std(mode), ratio]
    summary = {"kind": mode.kind, "min_signal": floor, "static_signal": static,
               "integration_time": t_int, "thermal_std": row[4], "K_t_over_kT": ratio}
    return [row], summary


def _validate(cfg, obj, ctx):
    checks = _checks(obj)
    rows = [[c.name, c.ratio, c.threshold, c.passed] for c in checks]
    return rows, {"all_passed": all(c.passed for c in checks),
                  "failed": [c.name for c in checks if not c.passed]}


def _sim_config(cfg, obj, member_base=0):
    model = cfg.get("sim", "spin_model")
    drive = _drive(obj)
    x0 = 0.0
    if model != "off":
        _, x0 = _operating(cfg, obj, drive)
    base = dict(mode=obj.mode, spin=obj.spin, field=obj.field, spin_model=model,
                duration=cfg.si("sim", "duration_s"), seed=cfg.get("sim", "seed"),
                stride=cfg.get("sim", "stride"), transition=obj.transition, drive=drive,
                x0=x0 + cfg.si("sim", "x0_offset_SI"), member=member_base,
                thermal_start=bool(cfg.get("sim", "thermal_start")))
    dt = cfg.si("sim", "dt_s")
    if dt is None:
        probe = SimConfig(dt=base["duration"] * 1e-9, check_dt=False, **base)
        dt = 0.5 * probe.max_dt()
    return SimConfig(dt=dt, **base), drive, x0


def _run_members(sc, members, workers):
    base = sc.member
    cfgs = [replace(sc, member=base + k) for k in range(members)]
    if workers > 1 and members > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(simulate, cfgs))
    return [simulate(c) for c in cfgs]


def _sim_summary(sc, obj, drive, x0, trajs):
    mode = obj.mode
    out = {"dt": sc.dt, "n_steps": sc.n_steps, "members": len(trajs), "spin_model": sc.spin_model,
           "omega_fit": math.nan, "gamma_fit": math.nan, "gamma_tilde": math.nan,
           "T_f": math.nan}
    psd = None
    omega = mode.omega0
    if sc.spin_model != "off":
        res = analyze(obj.spin, drive, mode, drive.Delta - drive.G * x0)
        out["gamma_tilde"], out["T_f"] = res.gamma_tilde, res.T_f
        omega = res.omega_tilde
    g_ref = out["gamma_tilde"] if sc.spin_model != "off" else mode.gamma
    if mode.T_bath > 0 and g_ref > 0 and sc.duration >= 20.0 / g_ref:
        try:
            psd = welch_psd(trajs)
            fit = fit_lorentzian(psd)
            out["omega_fit"], out["gamma_fit"] = fit.omega, fit.gamma
            omega = fit.omega
        except ValueError as exc:
            warnings.warn(f"no spectral estimate: {exc}", RuntimeWarning, stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out["T_eff"] = equipartition_temperature(trajs, mode, omega=omega, discard=0.1)
    return out, psd


def _simulate(cfg, obj, ctx):
    sc, drive, x0 = _sim_config(cfg, obj, ctx["point"] * cfg.get("sim", "members"))
    trajs = _run_members(sc, cfg.get("sim", "members"), ctx["inner_workers"])
    summary, psd = _sim_summary(sc, obj, drive, x0, trajs)
    if ctx["sweep"]:
        row = [summary[k] for k in ("T_eff", "omega_fit", "gamma_fit", "gamma_tilde", "T_f")]
        return [row], summary
    rows = []
    for k, tr in enumerate(trajs):
        a = tr.to_array()
        re = a[:, 4] if a.shape[1] > 4 else np.full(len(a), math.nan)
        im = a[:, 5] if a.shape[1] > 5 else np.full(len(a), math.nan)
        for t, x, v, r, c1, c2 in zip(a[:, 0].tolist(), a[:, 1].tolist(), a[:, 2].tolist(),
                                      a[:, 3].tolist(), re.tolist(), im.tolist()):
            rows.append([sc.member + k, t, x, v, r, c1, c2])
    if psd is not None:
        ctx["extra"]["simulate_psd"] = [[w, s] for w, s in zip(psd.omega.tolist(), psd.S.tolist())]
    return rows, summary


HANDLERS = {
    "odmr": _odmr,
    "coupling": _coupling,
    "equilibria": _equilibria,
    "backaction": _backaction,
    "sensitivity": _sensitivity,
    "simulate": _simulate,
    "validate": _validate,
}


# ---------------------------------------------------------------- plumbing

def _checks(obj):
    # includes the K_t >= 10 kT confinement check for librational modes
    return list(validity_report(obj.spin, obj.field, obj.mode))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)  # "nan", "inf" as strings keep JSON strict
    return v


def _header(command, cfg, seed, reproducible):
    lines = [f"# tool: spinmech {__version__}", f"# command: {command}",
             f"# config_sha256: {cfg.hash()}", f"# seed: {seed}"]
    if not reproducible:
        lines.append(f"# generated: {_dt.datetime.now(_dt.timezone.utc).isoformat()}")
    return lines


def _write_csv(path, header, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _point(cfg, pt, idx, command, args, inner_workers):
    for key, val in pt:
        cfg = cfg.with_value(key, val)
    obj = build_objects(cfg)
    failed = [c for c in _checks(obj) if not c.passed]
    for c in failed:
        print(f"warning: validity check failed at point {idx}: {c}", file=sys.stderr)
    if args.strict and failed and command != "validate":
        raise ConfigError(f"{len(failed)} validity check(s) failed under --strict")
    ctx = {"point": idx, "sweep": bool(pt), "inner_workers": inner_workers, "extra": {},
           "failure": None}
    rows, summary = HANDLERS[command](cfg, obj, ctx)
    return rows, summary, ctx, failed


def run(command, args):
    cfg = load_config(args.config, command)
    if args.seed is not None:
        cfg.values["sim"]["seed"] = args.seed
    seed = cfg.get("sim", "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    points = sweep_points(cfg)
    sweeping = bool(points[0])
    workers = max(1, args.workers)
    if sweeping and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ip: _point(cfg, ip[1], ip[0], command, args, 1),
                                    enumerate(points)))
    else:
        results = [_point(cfg, pt, i, command, args, workers) for i, pt in enumerate(points)]

    schema = load_schema()
    table = "simulate_sweep" if (command == "simulate" and sweeping) else command
    sweep_cols = [k for k, _ in points[0]]
    columns = sweep_cols + list(schema[table])
    rows = []
    for pt, (r, _, _, _) in zip(points, results):
        prefix = [v for _, v in pt]
        rows += [prefix + row for row in r]
    os.makedirs(args.out, exist_ok=True)
    header = _header(command, cfg, seed, args.reproducible)
    _write_csv(os.path.join(args.out, f"{command}.csv"), header, columns, rows)
    extras = {}
    for _, _, ctx, _ in results:
        for name, xrows in ctx["extra"].items():
            extras.setdefault(name, []).extend(xrows)
    for name, xrows in extras.items():
        _write_csv(os.path.join(args.out, f"{name}.csv"), header, list(schema[name]), xrows)

    summaries = [s for _, s, _, _ in results]
    doc = {"tool": f"spinmech {__version__}", "command": command,
           "config_sha256": cfg.hash(), "seed": seed}
    if not args.reproducible:
        doc["generated"] = header[-1].split(": ", 1)[1]
    if sweeping:
        doc["sweep"] = [{"point": dict(pt), **s} for pt, s in zip(points, summaries)]
    else:
        doc["summary"] = summaries[0]
    with open(os.path.join(args.out, f"{command}.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")

    failures = [ctx["failure"] for _, _, ctx, _ in results if ctx["failure"]]
    if failures:
        raise NumericalFailure(failures[0])
    if command == "validate":
        failed = [c for _, _, _, f in results for c in f]
        if failed and args.strict:
            return EXIT_CONFIG
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI run configuration (defaults if omitted)")
    common.add_argument("-o", "--out", default=".", help="output directory (default: .)")
    common.add_argument("--seed", type=int, help="override [sim] seed")
    common.add_argument("--strict", action="store_true",
                        help="treat failed validity checks as invalid config")
    common.add_argument("--reproducible", action="store_true",
                        help="omit the timestamp so reruns are byte-identical")
    common.add_argument("--workers", type=int, default=1,
                        help="threads for sweep points or ensemble members")
    p = argparse.ArgumentParser(prog="spinmech", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"spinmech {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "odmr": "ODMR spectrum from exact transition frequencies",
        "coupling": "coupling constants and the optimal angular coupling",
        "equilibria": "static equilibria and bistability",
        "backaction": "spin spring, damping and final temperature",
        "sensitivity": "thermal torque / force floor and static spin signal",
        "simulate": "stochastic time-domain simulation",
        "validate": "check the modelling assumptions",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args.command, args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, LabelingError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
