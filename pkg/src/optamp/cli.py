"""Command-line front end.

Loads a JSON config (keys named after ExperimentParams fields, SI units,
frequencies in Hz), applies --set overrides, dispatches to the analysis
modules, and emits CSV or JSON tables.  Every output carries a provenance
header (tool version + config hash) so identical inputs give byte-identical
files.

Exit status: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__, fields, noise, sensing, sidebands, stability, thermal
from .constants import TWO_PI
from .errors import OptampError
from .model import Model, build_model, consistency_report, pump_off
from .params import FREQUENCY_FIELDS_HZ, ExperimentParams


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config --

_FLOAT_FIELDS = {f.name for f in dataclasses.fields(ExperimentParams)
                 if f.name not in ("g_mode", "pump_tuning")}
_STR_FIELDS = {"g_mode", "pump_tuning"}


def _coerce(key: str, value):
    if key in _STR_FIELDS:
        return str(value)
    if key not in _FLOAT_FIELDS:
        raise UsageError(f"unknown parameter key {key!r}")
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise UsageError(f"parameter {key!r}: expected a number, got {value!r}")
    if key in FREQUENCY_FIELDS_HZ:
        x *= TWO_PI           # config files and CLI use Hz
    return x


def load_config(path: str | None, overrides=()) -> ExperimentParams:
    """Defaults <- config file <- command-line overrides, in that order."""
    values = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path!r}: {exc}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {path!r}: {exc}")
        if not isinstance(doc, dict):
            raise UsageError(f"config {path!r}: expected a JSON object")
        for key, val in doc.items():
            values[key] = _coerce(key, val)
    for item in overrides or ():
        if "=" not in item:
            raise UsageError(f"override {item!r}: expected key=value")
        key, _, val = item.partition("=")
        values[key.strip()] = _coerce(key.strip(), val.strip())
    return ExperimentParams(**values)


def _config_hash(params: ExperimentParams) -> str:
    blob = json.dumps(params.as_dict(), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- output --

def _provenance(params: ExperimentParams, command: str) -> dict:
    return {"tool": "optamp", "version": __version__,
            "command": command, "config_sha256": _config_hash(params)}


def _write_csv(stream, prov: dict, header: list, rows) -> None:
    for key, val in prov.items():
        stream.write(f"# {key}: {val}\n")
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10e}"


def _write_json(stream, prov: dict, payload: dict) -> None:
    doc = {"provenance": prov}
    doc.update(payload)
    json.dump(doc, stream, indent=2, sort_keys=True, default=_json_default)
    stream.write("\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(args, prov, header=None, rows=None, payload=None) -> None:
    out = (open(args.output, "w", encoding="utf-8", newline="")
           if args.output else sys.stdout)
    try:
        if args.format == "csv" and header is not None:
            _write_csv(out, prov, header, rows)
        else:
            _write_json(out, prov, payload)
    finally:
        if args.output:
            out.close()


def _grid_hz(args) -> np.ndarray:
    if args.f_min <= 0 or args.f_min >= args.f_max:
        raise UsageError("need 0 < f-min < f-max")
    if args.points < 2:
        raise UsageError("need at least 2 grid points")
    if args.linear:
        return np.linspace(args.f_min, args.f_max, args.points)
    return np.logspace(math.log10(args.f_min), math.log10(args.f_max),
                       args.points)


def _model(args) -> Model:
    params = load_config(args.config, args.set)
    if getattr(args, "offset_hz", None) is not None:
        params = params.with_overrides(
            pump_tuning="fixed",
            omega_p=params.omega_m + TWO_PI * args.offset_hz)
    return build_model(params)


# ----------------------------------------------------------- subcommands --

def _cmd_derive(args) -> int:
    m = _model(args)
    dq = m.dq
    payload = {
        "derived": {
            "tau_s": dq.tau, "tau_f_s": dq.tau_f,
            "r_0": dq.r_0, "t_0": dq.t_0, "r_f": dq.r_f, "t_f": dq.t_f,
            "r_m": dq.r_m, "t_m": dq.t_m,
            "gamma_0_hz": dq.gamma_0 / TWO_PI,
            "omega_0_rad_s": dq.omega_0,
            "omega_c_hz": dq.omega_c / TWO_PI,
            "g_hz": dq.g / TWO_PI,
            "delta_os_hz": dq.delta_os / TWO_PI,
            "fsr_f_hz": dq.fsr_f,
            "gamma_mech_rad_s": dq.gamma_mech,
            "pump_offset_hz": dq.omega_p_op / TWO_PI,
            "P_f_op_W": dq.P_f_op, "P_in_op_W": dq.P_in_op,
        },
        "consistency": consistency_report(m),
        "warnings": list(m.params.warnings),
    }
    _emit(args, _provenance(m.raw, "derive"), payload=payload)
    return 0


def _cmd_fields(args) -> int:
    m = _model(args)
    balance = fields.static_power_balance(m.dq, m.raw.P_carrier_in)
    payload = {
        "pump": {
            "A_f1": m.pump.A_f1, "A_f2": m.pump.A_f2,
            "A_f3": m.pump.A_f3, "A_f4": m.pump.A_f4,
            "mu": m.pump.mu, "P_sub_W": m.pump.P_sub,
            "P_in_W": m.pump.P_in, "residual": m.pump.residual,
        },
        "carrier": {
            "A_main": m.carrier.A_main, "P_main_W": m.carrier.P_main,
            "P_filter_W": m.carrier.P_filter, "T_eff": m.carrier.T_eff,
            "residual": m.carrier.residual,
        },
        "carrier_power_balance": balance,
    }
    _emit(args, _provenance(m.raw, "fields"), payload=payload)
    return 0


def _cmd_response(args) -> int:
    m = _model(args)
    f = _grid_hz(args)
    tf = sidebands.signal_response(m.dq, m.pump, TWO_PI * f,
                                   normalize=not args.no_normalize)
    rows = [(fi, v.real, v.imag, abs(v)) for fi, v in zip(f, tf)]
    payload = {"f_hz": f, "response_re": tf.real, "response_im": tf.imag,
               "response_mag": np.abs(tf)}
    _emit(args, _provenance(m.raw, "response"),
          header=["f_Hz", "re", "im", "mag"], rows=rows, payload=payload)
    return 0


def _cmd_nyquist(args) -> int:
    m = _model(args)
    contour = stability.nyquist(m.dq, m.pump, points=args.points)
    winding = stability.winding_number(contour)
    if args.format == "csv":
        rows = [(v.real, v.imag) for v in contour.values]
        prov = _provenance(m.raw, "nyquist")
        prov["winding"] = winding
        prov["stable"] = winding == 0
        _emit(args, prov, header=["Re", "Im"], rows=rows)
    else:
        payload = {"winding": winding, "stable": winding == 0,
                   "omega_rad_s": contour.omegas,
                   "re": contour.values.real, "im": contour.values.imag}
        _emit(args, _provenance(m.raw, "nyquist"), payload=payload)
    return 0


def _cmd_noise_budget(args) -> int:
    m = _model(args)
    t_over_q = (args.t_over_q if args.t_over_q is not None
                else m.raw.T_bath / m.raw.Q_m)
    budget = noise.total_budget(m.dq, m.pump, _grid_hz(args), t_over_q)
    summary = {
        "peak_improvement": budget.peak_improvement,
        "peak_improvement_freq_hz": budget.peak_improvement_freq_hz,
        "t_over_q_K": t_over_q,
    }
    if args.format == "csv":
        header = ["f_Hz", "input_vacuum", "loss_main", "loss_filter",
                  "thermal", "total", "pump_off"]
        rows = zip(budget.freq_hz, budget.input_vacuum, budget.loss_main,
                   budget.loss_filter, budget.thermal, budget.total,
                   budget.pump_off_reference)
        _emit(args, _provenance(m.raw, "noise-budget"), header=header,
              rows=rows)
        if args.output:      # summary to stdout alongside the CSV file
            _write_json(sys.stdout, _provenance(m.raw, "noise-budget"),
                        {"summary": summary})
    else:
        payload = {"summary": summary, "f_hz": budget.freq_hz,
                   "input_vacuum": budget.input_vacuum,
                   "loss_main": budget.loss_main,
                   "loss_filter": budget.loss_filter,
                   "thermal": budget.thermal, "total": budget.total,
                   "pump_off": budget.pump_off_reference}
        _emit(args, _provenance(m.raw, "noise-budget"), payload=payload)
    return 0


def _cmd_thermal(args) -> int:
    params = load_config(args.config, args.set)
    state = thermal.solve_temperature(params)
    payload = {"thermal": dataclasses.asdict(state)}
    _emit(args, _provenance(params, "thermal"), payload=payload)
    return 0


def _cmd_sensing(args) -> int:
    m = _model(args)
    matrix = sensing.sensing_matrix(m.dq)
    payload = {"sensing": {
        "demodulation_hz": list(matrix.f_mod_hz),
        "dofs": list(matrix.dofs),
        "entries": matrix.entries,
        "demod_phases_rad": matrix.demod_phases,
        "imag_residue": matrix.imag_residue,
    }}
    _emit(args, _provenance(m.raw, "sensing"), payload=payload)
    return 0


def _cmd_scan(args) -> int:
    base = load_config(args.config, args.set)
    values = np.linspace(args.min, args.max, args.points)
    rows = []
    for val in values:
        params = base.with_overrides(**{args.param: _coerce(args.param, val)})
        m = build_model(params)
        contour = stability.nyquist(m.dq, m.pump, points=1000)
        winding = stability.winding_number(contour)
        peak = math.nan
        if winding == 0:
            budget = noise.total_budget(
                m.dq, m.pump, np.logspace(2, math.log10(20e3), 120),
                m.raw.T_bath / m.raw.Q_m)
            peak = budget.peak_improvement
        rows.append((val, winding == 0, winding, peak,
                     m.dq.delta_os / TWO_PI))
    header = [args.param, "stable", "winding", "peak_improvement",
              "delta_os_hz"]
    payload = {"scan": [dict(zip(header, r)) for r in rows]}
    _emit(args, _provenance(base, "scan"), header=header, rows=rows,
          payload=payload)
    return 0


# ---------------------------------------------------------------- parser --

def _add_common(sub, grid=False):
    sub.add_argument("--config", default=None, help="JSON parameter file")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                     help="override a parameter (frequencies in Hz)")
    sub.add_argument("--output", default=None, help="output path (default stdout)")
    sub.add_argument("--format", choices=("csv", "json"), default=None)
    if grid:
        sub.add_argument("--f-min", type=float, default=100.0)
        sub.add_argument("--f-max", type=float, default=20e3)
        sub.add_argument("--points", type=int, default=400)
        sub.add_argument("--linear", action="store_true",
                         help="linear instead of logarithmic grid")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="optamp",
        description="Coupled-cavity interferometer with an optomechanical "
                    "phase-insensitive amplifier: frequency-domain analysis")
    ap.add_argument("--version", action="version", version=__version__)
    sp = ap.add_subparsers(dest="command", required=True)

    sub = sp.add_parser("derive", help="derived quantities and diagnostics")
    _add_common(sub)
    sub.set_defaults(func=_cmd_derive, default_format="json")

    sub = sp.add_parser("fields", help="static pump and carrier fields")
    _add_common(sub)
    sub.set_defaults(func=_cmd_fields, default_format="json")

    sub = sp.add_parser("response", help="end-mirror to readout transfer")
    _add_common(sub, grid=True)
    sub.add_argument("--offset-hz", type=float, default=None,
                     help="fixed pump offset from the membrane mode [Hz]")
    sub.add_argument("--no-normalize", action="store_true")
    sub.set_defaults(func=_cmd_response, default_format="csv")

    sub = sp.add_parser("nyquist", help="stability contour and winding")
    _add_common(sub)
    sub.add_argument("--offset-hz", type=float, default=None)
    sub.add_argument("--points", type=int, default=4000)
    sub.set_defaults(func=_cmd_nyquist, default_format="csv")

    sub = sp.add_parser("noise-budget", help="normalized noise budget")
    _add_common(sub, grid=True)
    sub.add_argument("--t-over-q", type=float, default=None,
                     help="temperature over mechanical Q [K]")
    sub.set_defaults(func=_cmd_noise_budget, default_format="csv")

    sub = sp.add_parser("thermal", help="membrane self-heating fixed point")
    _add_common(sub)
    sub.set_defaults(func=_cmd_thermal, default_format="json")

    sub = sp.add_parser("sensing", help="length-sensing matrix")
    _add_common(sub)
    sub.set_defaults(func=_cmd_sensing, default_format="json")

    sub = sp.add_parser("scan", help="1-D parameter sweep")
    _add_common(sub)
    sub.add_argument("--param", required=True)
    sub.add_argument("--min", type=float, required=True)
    sub.add_argument("--max", type=float, required=True)
    sub.add_argument("--points", type=int, default=11)
    sub.set_defaults(func=_cmd_scan, default_format="csv")

    return ap


def run(argv=None) -> int:
    if "OPTAMP_NUM_THREADS" in os.environ:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ.setdefault(var, os.environ["OPTAMP_NUM_THREADS"])
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.format is None:
        args.format = args.default_format
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OptampError as exc:
        module = type(exc).__name__
        print(f"error: {args.command}: {module}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
