"""Batch command-line front end.

Every subcommand resolves its parameters as flag > config file > built-in
default, writes plot-ready CSV/JSON into the output directory and records the
resolved parameters in ``manifest.json``.  Data files carry no timestamps, so
identical configurations give byte-identical data.

Exit status: 0 on success, 2 on invalid input, 3 on numeric failure.
"""

import argparse
import csv
import datetime
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__
from .audit import PRESETS, AuditInput, PhysicalConstants, run_audit
from .convolution import (TimeGrid, Trajectory, convolution_error_report,
                          default_transient_cut, dissipative_pair_convolution)
from .errors import DomainError, NumericError
from .influence import (IMAG_KERNELS, PathPair, gamma_exponent, markov_imag_part)
from .kernels import (KINDS, METHODS, MenskyDamping, OhmicBath, kernel_table,
                      kernel_time_scale, markov_dissipation_coefficients,
                      markov_weight, write_kernel_csv)
from .relaxation import (FrictionKernel, OscillatorSpec, analyze_decay,
                         max_stable_step, simulate, write_trajectory_csv)
from .util import dumps, fmt_float

ENV_OUT = "MEMKERNEL_OUT"
DEFAULT_OUT = "memkernel-out"
MAX_AXIS_POINTS = 200
SWEEP_TARGETS = ("weights", "convolve", "influence", "relax", "audit")


class Param(NamedTuple):
    name: str
    type: type
    default: object
    help: str
    choices: tuple = None


def _bath_params(omega=1.0):
    return [Param("eta", float, 1.0, "friction strength eta"),
            Param("omega", float, omega, "bath cutoff frequency"),
            Param("gamma", float, 0.0, "measurement damping rate")]


PARAMS = {
    "kernels": _bath_params() + [
        Param("kind", str, "R", "kernel kind", KINDS),
        Param("tau_max", float, 50.0, "largest lag"),
        Param("n_tau", int, 1001, "number of lags in [0, tau_max]"),
        Param("method", str, "closed", "evaluation method", METHODS)],
    "weights": _bath_params() + [
        Param("horizon", float, math.inf, "upper limit of the lag integral"),
        Param("method", str, "closed", "evaluation method", METHODS)],
    "convolve": _bath_params(omega=100.0) + [
        Param("omega0", float, 1.0, "signal frequency of q = cos(omega0 t)"),
        Param("t_end", float, 20.0, "final time"),
        Param("dt", float, None, "time step (default 0.02/omega)"),
        Param("transient_cut", float, None, "start of the error window")],
    "influence": _bath_params(omega=20.0) + [
        Param("hbar", float, 1.0, "action unit"),
        Param("t_end", float, 10.0, "final time"),
        Param("dt", float, 0.01, "time step"),
        Param("amp1", float, 1.0, "amplitude of path 1"),
        Param("amp2", float, 0.5, "amplitude of path 2"),
        Param("freq1", float, 1.0, "frequency of path 1"),
        Param("freq2", float, 1.3, "frequency of path 2"),
        Param("imag_kernel", str, "derivative", "damped dissipation kernel form",
              IMAG_KERNELS)],
    "relax": [
        Param("mode", str, "memory", "equation of motion", ("memory", "markov")),
        Param("eta", float, 0.2, "friction strength eta"),
        Param("omega_ratio", float, 50.0, "cutoff in units of omega0"),
        Param("gamma_ratio", float, 0.0, "damping rate in units of omega0"),
        Param("omega0", float, 1.0, "oscillator frequency"),
        Param("mass0", float, 1.0, "oscillator mass"),
        Param("t_end", float, 200.0, "final time"),
        Param("dt", float, None, "time step (default: largest stable step)"),
        Param("q0", float, 1.0, "initial position"),
        Param("v0", float, 0.0, "initial velocity"),
        Param("analyze", bool, False, "fit the decay envelope")],
    "audit": [
        Param("preset", str, None, "named input bundle", tuple(PRESETS)),
        Param("eta", float, None, "relaxation rate [1/s]"),
        Param("gamma", float, None, "measurement rate [1/s]"),
        Param("omega", float, None, "bath cutoff [1/s]"),
        Param("mass_b", float, None, "bath oscillator mass [g]"),
        Param("omega0", float, None, "system frequency [1/s], optional"),
        Param("units", str, "cgs", "cgs, or natural units with hbar = 1",
              ("cgs", "natural"))],
    "sweep": [
        Param("target", str, "weights", "subcommand evaluated at each point",
              SWEEP_TARGETS),
        Param("workers", int, None, "parallel worker processes")],
}


def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise DomainError(f"not a boolean: {text!r}")


def _convert(param, value):
    if value is None or isinstance(value, param.type) and not isinstance(value, str):
        converted = value
    elif param.type is bool:
        converted = _parse_bool(value)
    else:
        try:
            converted = param.type(value)
        except ValueError:
            raise DomainError(f"{param.name}: cannot parse {value!r}") from None
    if param.choices and converted is not None and converted not in param.choices:
        raise DomainError(f"{param.name} must be one of {param.choices}, got {converted!r}")
    return converted


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment, ``axis`` may repeat."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DomainError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key in ("axis", "set"):
            values.setdefault(key, []).append(value)
        else:
            values[key] = value
    return values


def resolve(command, flags, config):
    """Merge flag, config and default values for ``command``."""
    params = {p.name: p for p in PARAMS[command]}
    unknown = set(config) - set(params) - {"out", "axis", "set"}
    if unknown:
        raise DomainError(f"unknown config keys for {command}: {sorted(unknown)}")
    resolved = {}
    for name, param in params.items():
        if name in flags:
            raw = flags[name]
        elif name in config:
            raw = config[name]
        else:
            raw = param.default
        resolved[name] = _convert(param, raw)
    return resolved


def output_dir(flag_out, config):
    """``--out`` beats ``$MEMKERNEL_OUT`` beats the config ``out`` key."""
    for candidate in (flag_out, os.environ.get(ENV_OUT), config.get("out")):
        if candidate:
            return Path(candidate)
    return Path(DEFAULT_OUT)


def _positive(**values):
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{name} must be positive and finite, got {value!r}")


def _bath(p):
    return OhmicBath(p["eta"], p["omega"]), MenskyDamping(p["gamma"])


def _cos_path(grid, amp, freq):
    return Trajectory.from_function(grid, lambda t: amp * np.cos(freq * t),
                                    lambda t: -amp * freq * np.sin(freq * t))


# each runner writes its data files into ``out`` and returns (scalars, files)

def run_kernels(p, out):
    bath, damping = _bath(p)
    _positive(tau_max=p["tau_max"])
    if p["n_tau"] < 2:
        raise DomainError("n_tau must be at least 2")
    table = kernel_table(p["kind"], np.linspace(0, p["tau_max"], p["n_tau"]),
                         bath, damping, p["method"])
    with open(out / "kernels.csv", "w", newline="") as fh:
        write_kernel_csv(fh, table, bath, damping)
    return {"value_at_zero": float(table.values[0])}, ["kernels.csv"]


def run_weights(p, out):
    bath, damping = _bath(p)
    kinds = ("R", "I", "R_damped", "I_damped") if damping.gamma == 0 else ("R_damped", "I_damped")
    weights = {k: markov_weight(k, bath, damping, p["horizon"], p["method"]) for k in kinds}
    scale = kernel_time_scale(bath, damping)
    pos, vel = markov_dissipation_coefficients(bath, damping)
    scalars = {"tau_R": scale.value, "velocity_coeff": vel, "position_coeff": pos}
    report = dict(scalars, weights=weights, tau_R_exact_limit=scale.exact_limit,
                  horizon=p["horizon"])
    (out / "weights.json").write_text(dumps(report))
    return scalars, ["weights.json"]


def run_convolve(p, out):
    bath, damping = _bath(p)
    _positive(t_end=p["t_end"], omega0=p["omega0"])
    dt = p["dt"] if p["dt"] is not None else 0.02 / bath.omega_cut
    _positive(dt=dt)
    grid = TimeGrid.spanning(p["t_end"], dt)
    signal = _cos_path(grid, 1.0, p["omega0"])
    zero = Trajectory(grid, np.zeros(grid.n_steps), np.zeros(grid.n_steps))
    exact = dissipative_pair_convolution(signal, zero, bath, damping, "exact")
    markov = dissipative_pair_convolution(signal, zero, bath, damping, "markov")
    cut = p["transient_cut"]
    if cut is None:
        cut = default_transient_cut(bath, damping)
    report = convolution_error_report(exact, markov, cut)
    with open(out / "convolution.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "exact", "markov"])
        for row in zip(grid.times, exact.values, markov.values):
            writer.writerow([fmt_float(x) for x in row])
    (out / "report.json").write_text(dumps(report.to_dict()))
    scalars = {"sup_rel": report.sup_rel, "l2_rel": report.l2_rel,
               "tail_mag": report.tail_mag}
    return scalars, ["convolution.csv", "report.json"]


def run_influence(p, out):
    bath, damping = _bath(p)
    _positive(t_end=p["t_end"], dt=p["dt"], hbar=p["hbar"])
    grid = TimeGrid.spanning(p["t_end"], p["dt"])
    paths = PathPair(_cos_path(grid, p["amp1"], p["freq1"]),
                     _cos_path(grid, p["amp2"], p["freq2"]))
    parts = gamma_exponent(paths, bath, damping, hbar=p["hbar"],
                           imag_kernel=p["imag_kernel"])
    scalars = {"real_part": parts.real_part, "imag_part": parts.imag_part,
               "decoherence_factor": parts.decoherence_factor,
               "markov_imag_part": markov_imag_part(paths, bath, damping, p["hbar"])}
    (out / "influence.json").write_text(dumps(dict(parts.to_dict(), **scalars)))
    return scalars, ["influence.json"]


def run_relax(p, out):
    _positive(t_end=p["t_end"])
    osc = OscillatorSpec(p["mass0"], p["omega0"])
    kernel = FrictionKernel(p["eta"], p["omega_ratio"] * p["omega0"],
                            p["gamma_ratio"] * p["omega0"])
    dt = p["dt"] if p["dt"] is not None else max_stable_step(osc, kernel)
    _positive(dt=dt)
    traj = simulate(p["mode"], osc, kernel, TimeGrid.spanning(p["t_end"], dt),
                    p["q0"], p["v0"])
    with open(out / "trajectory.csv", "w", newline="") as fh:
        write_trajectory_csv(fh, traj)
    files = ["trajectory.csv"]
    scalars = {}
    if p["analyze"]:
        analysis = analyze_decay(traj)
        (out / "analysis.json").write_text(
            dumps(dict(analysis.to_dict(), kernel=kernel.metadata(), mode=p["mode"])))
        files.append("analysis.json")
        scalars = {"tail_residual": analysis.tail_residual,
                   "fitted_rate": analysis.fitted_rate,
                   "classification": analysis.classification}
    return scalars, files


def run_audit_cmd(p, out):
    base = {}
    if p["preset"] is not None:
        preset = PRESETS[p["preset"]]
        base = {"eta": preset.eta, "gamma": preset.gamma, "omega": preset.omega_cut,
                "mass_b": preset.mass_b}
    values = {k: p[k] if p[k] is not None else base.get(k)
              for k in ("eta", "gamma", "omega", "mass_b")}
    missing = sorted(k for k, v in values.items() if v is None)
    if missing:
        raise DomainError(f"audit needs --preset or values for {missing}")
    inp = AuditInput(values["eta"], values["gamma"], values["omega"], values["mass_b"])
    constants = PhysicalConstants() if p["units"] == "cgs" else PhysicalConstants(hbar=1.0)
    report = run_audit(inp, constants, p["omega0"])
    (out / "audit.json").write_text(report.to_json())
    scalars = {"gamma_over_eta": report.margins[0], "omega_over_gamma": report.margins[1],
               "k_real": report.k_real, "k_imag": report.k_imag,
               "ordering_pass": report.ordering_pass}
    return scalars, ["audit.json"]


RUNNERS = {"kernels": run_kernels, "weights": run_weights, "convolve": run_convolve,
           "influence": run_influence, "relax": run_relax, "audit": run_audit_cmd}


def _prepare(out):
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise DomainError(f"output directory {out} is not writable: {exc}") from None


def _manifest(command, params, files, extra=None):
    record = {"tool": "memkernel", "version": __version__, "subcommand": command,
              "params": params, "outputs": sorted(files),
              "created": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    record.update(extra or {})
    return dumps(record)


def execute(command, params, out):
    """Run one subcommand into ``out`` and write its manifest; return scalars."""
    out = Path(out)
    _prepare(out)
    scalars, files = RUNNERS[command](params, out)
    (out / "manifest.json").write_text(_manifest(command, params, files))
    return scalars


def parse_axis(text):
    """``name=v1,v2,...``, ``name=lin:a:b:n`` or ``name=log:a:b:n``."""
    name, sep, body = text.partition("=")
    name = name.strip().replace("-", "_")
    if not sep or not name:
        raise DomainError(f"axis {text!r} must look like name=values")
    body = body.strip()
    try:
        if body.startswith(("lin:", "log:")):
            kind, a, b, n = body.split(":")
            a, b, n = float(a), float(b), int(n)
            if kind == "lin":
                values = np.linspace(a, b, n)
            else:
                if not (a > 0 and b > 0):
                    raise DomainError(f"log axis {name} needs positive bounds")
                values = np.geomspace(a, b, n)
        else:
            values = [float(v) for v in body.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"cannot parse axis {text!r}") from None
    values = [float(v) for v in values]
    if not values:
        raise DomainError(f"axis {name} is empty")
    if len(values) > MAX_AXIS_POINTS:
        raise DomainError(f"axis {name} has {len(values)} points; limit is {MAX_AXIS_POINTS}")
    return name, values


def _sweep_point(args):
    target, params, out = args
    return execute(target, params, out)


def run_sweep(target, base, axes, out, workers=None):
    """Evaluate ``target`` on the product grid of ``axes``.

    Point ``i`` (row-major over the axes) writes into ``out/point_{i:04d}``;
    ``summary.csv`` lists the axis values and scalar outputs of every point in
    that order regardless of which worker finished first.
    """
    if not 1 <= len(axes) <= 2:
        raise DomainError("sweep needs one or two axes")
    names = [name for name, _ in axes]
    if len(set(names)) != len(names):
        raise DomainError("sweep axes must be distinct")
    float_params = {p.name for p in PARAMS[target] if p.type is float}
    for name in names:
        if name not in float_params:
            raise DomainError(f"{name} is not a numeric parameter of {target}")
    out = Path(out)
    _prepare(out)
    if target == "relax":
        base = dict(base, analyze=True)
    jobs = []
    for i, combo in enumerate(itertools.product(*(values for _, values in axes))):
        params = dict(base, **dict(zip(names, combo)))
        jobs.append((target, params, out / f"point_{i:04d}"))

    workers = workers or min(4, len(os.sched_getaffinity(0)))
    if workers < 1:
        raise DomainError("workers must be positive")
    if workers == 1 or len(jobs) == 1:
        results = [_sweep_point(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_point, jobs))

    columns = sorted({key for r in results for key in r})
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["point"] + names + columns)
        for (_, params, path), scalars in zip(jobs, results):
            row = [path.name] + [fmt_float(params[n]) for n in names]
            for col in columns:
                value = scalars.get(col, "")
                row.append(fmt_float(value) if isinstance(value, (float, int))
                           and not isinstance(value, bool) else str(value))
            writer.writerow(row)
    extra = {"axes": {n: v for n, v in axes}, "target": target}
    (out / "manifest.json").write_text(
        _manifest("sweep", base, ["summary.csv"] + [j[2].name for j in jobs], extra))
    return results


def build_parser():
    parser = argparse.ArgumentParser(
        prog="memkernel", description="Memory kernels and Markov-limit diagnostics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, params in PARAMS.items():
        sp = sub.add_parser(command, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--out", help=f"output directory (overrides ${ENV_OUT})")
        for p in params:
            flag = "--" + p.name.replace("_", "-")
            if p.type is bool:
                sp.add_argument(flag, dest=p.name, action=argparse.BooleanOptionalAction,
                                help=p.help)
            else:
                sp.add_argument(flag, dest=p.name, type=str, help=p.help,
                                choices=p.choices, metavar=None if p.choices else "X")
        if command == "sweep":
            sp.add_argument("--axis", action="append",
                            help="name=v1,v2 | lin:a:b:n | log:a:b:n (repeatable)")
            sp.add_argument("--set", action="append",
                            help="base parameter of the target, key=value (repeatable)")
    return parser


def _run(ns):
    flags = vars(ns)
    command = flags.pop("command")
    config = read_config(flags.pop("config")) if "config" in flags else {}
    out = output_dir(flags.pop("out", None), config)
    if command != "sweep":
        params = resolve(command, flags, config)
        scalars = execute(command, params, out)
        if command == "audit":
            sys.stdout.write((out / "audit.json").read_text())
        else:
            print(f"wrote {out}")
            for key in sorted(scalars):
                print(f"{key} = {scalars[key]}")
        return

    axis_texts = flags.pop("axis", None) or config.get("axis", [])
    set_texts = (config.get("set", []) + (flags.pop("set", None) or []))
    sweep_config = {k: v for k, v in config.items() if k in ("target", "workers")}
    sweep = resolve("sweep", flags, sweep_config)
    target = sweep["target"]
    base_raw = {k: v for k, v in config.items() if k not in ("target", "workers", "out", "axis", "set")}
    for item in set_texts:
        key, sep, value = item.partition("=")
        if not sep:
            raise DomainError(f"--set {item!r} must be key=value")
        base_raw[key.strip().replace("-", "_")] = value.strip()
    base = resolve(target, {}, base_raw)
    axes = [parse_axis(text) for text in axis_texts]
    run_sweep(target, base, axes, out, sweep["workers"])
    print(f"wrote {out / 'summary.csv'}")


def main(argv=None):
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        _run(ns)
    except DomainError as exc:
        print(f"memkernel: error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"memkernel: numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0
