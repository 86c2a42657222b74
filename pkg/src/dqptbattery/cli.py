"""
Command-line entry point.

Subcommands::

    evolve      energy and power densities versus time
    modes       momentum-resolved stored energy and power (long format k, t, value)
    critical    Loschmidt rate function with critical-mode energy, power and |G|
    saturation  long-time plateau energy and variance versus the final field
    snr         rate function, SNR rate function and critical-mode SNR
    sweep       generic sweep driven by a model file's [sweep] section
    dqpt-info   critical momentum, band energy and critical times

Values are resolved as flags > model-file sections > defaults. Exit status is
0 on success, 1 for computation errors and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dqpt import critical_times, detect_cusps
from .dsl import ModelFile, parse_model_file
from .ensemble import saturation_weight
from .errors import BatteryError, ConfigError, NoDQPT, ParseError
from .model_core import momentum_grid
from .svg import render_svg
from .sweep import SweepResult, build_plan, run_sweep
from .tables import format_float, to_csv, to_json, write_table

COMMANDS = ("evolve", "modes", "critical", "saturation", "snr", "sweep", "dqpt-info")


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gi", type=float, help="initial transverse field")
    common.add_argument("--gf", type=float, nargs="+", help="final transverse field(s)")
    common.add_argument("--model", metavar="PATH", help="model-definition file")
    common.add_argument("--out", metavar="PATH", help="output path (extension added)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--svg", action="store_true", help="also write an SVG line plot")
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--timing", action="store_true", help="record wall time in metadata")

    timed = argparse.ArgumentParser(add_help=False)
    timed.add_argument("--tmax", type=float)
    timed.add_argument("--nt", type=int)
    timed.add_argument("--time-unit", choices=("abs", "tc"), default=None)

    scheme = argparse.ArgumentParser(add_help=False)
    scheme.add_argument("--scheme", choices=("quad", "finite"), default=None)
    scheme.add_argument("--N", type=int, help="number of lattice sites for the finite scheme (even)")
    scheme.add_argument("--panels", type=int, help="base Gauss-Legendre panel count")

    parser = argparse.ArgumentParser(prog="dqpt-battery", description="Quench-charged free-fermion battery simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("evolve", parents=[common, timed, scheme], help="energy/power densities vs time")
    modes = sub.add_parser("modes", parents=[common, timed], help="momentum-resolved energy and power")
    modes.add_argument("--nk", type=int, help="number of momenta (midpoint grid)")
    crit = sub.add_parser("critical", parents=[common, timed, scheme], help="rate function and critical mode")
    crit.add_argument("--cusp-factor", type=float, default=5.0)
    crit.add_argument("--cusp-window", type=int, default=5)
    sat = sub.add_parser("saturation", parents=[common, scheme], help="plateau energy vs final field")
    sat.add_argument("--gf-range", type=float, nargs=3, metavar=("START", "STOP", "STEPS"))
    sat.add_argument("--weights", type=int, metavar="NK", help="also write W(k) on an NK-point grid")
    sub.add_parser("snr", parents=[common, timed, scheme], help="SNR rate function")
    sw = sub.add_parser("sweep", parents=[common, timed, scheme], help="generic sweep from a model file")
    sw.add_argument("--param", help="swept parameter (gf, gi, or a model parameter)")
    sw.add_argument("--values", type=float, nargs="+")
    sw.add_argument("--observables", help="comma-separated observable names")
    info = sub.add_parser("dqpt-info", parents=[common], help="critical momentum and times")
    info.add_argument("--nmax", type=int, default=4)
    return parser


# ---------------------------------------------------------------- config resolution


def _load_model(args) -> ModelFile | None:
    if not args.model:
        return None
    try:
        text = Path(args.model).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read model file: {err}") from None
    try:
        model = parse_model_file(text)
    except ParseError as err:
        raise UsageError(f"{args.model}: {err}") from None
    except BatteryError as err:
        raise UsageError(f"{args.model}: {err}") from None
    if args.gi is not None and "g" in model.initial.params:
        model.initial = model.initial.with_params(g=args.gi)
    if args.gf is not None and "g" in model.final.params:
        model.final = model.final.with_params(g=args.gf[0])
    return model


def _pick(flag, section: dict, key, default, cast=str):
    if flag is not None:
        return flag
    if key in section:
        try:
            return cast(section[key])
        except ValueError:
            raise UsageError(f"config value {key} = {section[key]!r} is not a valid {cast.__name__}") from None
    return default


def _scheme_config(args, model, default_kind="quad", default_N=4000):
    sec = model.sections.get("scheme", {}) if model else {}
    kind = _pick(getattr(args, "scheme", None), sec, "kind", default_kind)
    if kind == "finite":
        N = _pick(getattr(args, "N", None), sec, "N", default_N, int)
        if N < 2 or N % 2:
            raise UsageError("--N must be an even number of sites >= 2")
        return {"kind": "finite", "N": N}
    cfg = {"kind": kind}
    panels = _pick(getattr(args, "panels", None), sec, "panels", None, int)
    if panels is not None:
        cfg["panels"] = panels
    for key in ("nodes", "log_panels"):
        if key in sec:
            cfg[key] = _pick(None, sec, key, None, int)
    return cfg


def _model_config(args, model):
    if model is not None:
        return {"file": model}
    if args.gi is None or args.gf is None:
        raise UsageError("--gi and --gf are required unless --model is given")
    return {"gi": args.gi, "gf": args.gf[0]}


def _axis_config(args, model, default_values=None):
    if model is None:
        return {"name": "gf", "values": list(args.gf if default_values is None else default_values)}
    sec = model.sections.get("sweep", {})
    name = sec.get("param", "g")
    if "values" in sec:
        return {"name": name, "values": [float(v) for v in sec["values"].split(",")]}
    if "start" in sec:
        return {"name": name, "start": sec["start"], "stop": sec.get("stop", sec["start"]), "steps": sec.get("steps", 1)}
    return {"name": name}


def _time_config(args, model, tmax=8.0, nt=801):
    sec = model.sections.get("sweep", {}) if model else {}
    return {
        "t0": _pick(None, sec, "t0", 0.0, float),
        "t1": _pick(args.tmax, sec, "tmax", tmax, float),
        "nt": _pick(args.nt, sec, "nt", nt, int),
        "unit": _pick(args.time_unit, sec, "time_unit", "abs"),
    }


# ---------------------------------------------------------------- output


def _flags_echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, bool) or value is None:
            continue
        if isinstance(value, (int, float)) or (isinstance(value, list) and all(isinstance(v, (int, float)) for v in value)):
            out[key] = value
    return out


def _emit(args, result: SweepResult, stdout, extra_meta=None) -> Path | None:
    result.meta["command"] = args.command
    result.meta["flags"] = _flags_echo(args)
    if extra_meta:
        result.meta.update(extra_meta)
    fmt = args.format or "csv"
    if not args.out:
        stdout.write(to_csv(result) if fmt == "csv" else to_json(result, args.timing))
        return None
    base = Path(args.out)
    path = base.with_name(base.name + "." + fmt)
    write_table(result, fmt, path, include_timing=args.timing)
    if fmt == "csv":
        meta = dict(result.meta)
        if not args.timing:
            meta.pop("wall_time", None)
        sidecar = base.with_name(base.name + ".meta.json")
        with open(sidecar, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return base


def _drop_axis(result: SweepResult) -> SweepResult:
    """Remove the parameter column when it holds a single value."""
    if len(np.unique(result.rows[:, 0])) > 1 or not len(result.rows):
        return result
    return SweepResult(result.columns[1:], np.ascontiguousarray(result.rows[:, 1:]), result.meta)


def _svg(base, name, result, x, ys, group=None, title=None):
    if base is None:
        raise UsageError("--svg requires --out")
    render_svg(result, x, ys, base.with_name(f"{base.name}{name}.svg"), group_col=group, title=title)


# ---------------------------------------------------------------- commands


def _run_series(args, model, observables, stdout, scheme_default="quad", **time_defaults):
    config = {
        "model": _model_config(args, model),
        "axis": _axis_config(args, model),
        "time": _time_config(args, model, **time_defaults),
        "observables": observables,
        "scheme": _scheme_config(args, model, scheme_default),
    }
    plan = build_plan(config)
    result = run_sweep(plan, workers=args.workers or 1)
    return plan, result


def cmd_evolve(args, model, stdout):
    plan, result = _run_series(args, model, ["e_density", "p_density"], stdout)
    grouped = len(plan.axis_values) > 1
    result = result if grouped else _drop_axis(result)
    base = _emit(args, result, stdout)
    if args.svg:
        group = plan.axis_name if grouped else None
        _svg(base, "", result, "t", ["e_density"], group, "stored-energy density")
        _svg(base, "_power", result, "t", ["p_density"], group, "power density")


def cmd_modes(args, model, stdout):
    if args.svg:
        raise UsageError("modes produces long-format heatmap data; --svg is not supported")
    nk = args.nk or 400
    config = {
        "model": _model_config(args, model),
        "axis": _axis_config(args, model),
        "time": _time_config(args, model, tmax=5.0, nt=400),
        "observables": ["mode_delta_E", "mode_power", "mode_loschmidt_abs"],
        "modes": {"M": nk, "include_k_star": True},
    }
    result = run_sweep(build_plan(config), workers=args.workers or 1)
    result = _drop_axis(result)
    _emit(args, result, stdout)


def cmd_critical(args, model, stdout):
    plan, result = _run_series(
        args, model, ["rate_lambda", "delta_E_kstar", "power_kstar", "loschmidt_abs_kstar"], stdout, tmax=5.0, nt=2001
    )
    cusps = {}
    for value in plan.axis_values:
        mask = result.rows[:, 0] == value
        rows = result.rows[mask]
        if len(rows) >= 16:
            cusps[format_float(value)] = detect_cusps(rows[:, 1], rows[:, 2], args.cusp_factor, args.cusp_window)
    grouped = len(plan.axis_values) > 1
    result = result if grouped else _drop_axis(result)
    base = _emit(args, result, stdout, {"cusps": cusps})
    # Keep stdout a clean table when no --out is given.
    report = stdout if args.out else sys.stderr
    for value, times in cusps.items():
        for t in times:
            print(f"cusp {plan.axis_name}={float(value):g} t={t:.6g}", file=report)
    if args.svg:
        _svg(base, "", result, "t", ["rate_lambda", "delta_E_kstar"], plan.axis_name if grouped else None, "rate function")


def cmd_saturation(args, model, stdout):
    if model is None and args.gf is None and args.gf_range is None:
        args.gf_range = [0.2, 2.0, 19]
    if model is None:
        if args.gi is None:
            raise UsageError("--gi is required unless --model is given")
        if args.gf_range is not None:
            start, stop, steps = args.gf_range
            if steps < 1 or steps != int(steps):
                raise UsageError("--gf-range STEPS must be a positive integer")
            values = list(np.linspace(start, stop, int(steps)))
        else:
            values = list(args.gf)
        model_cfg = {"gi": args.gi, "gf": values[0]}
        axis = {"name": "gf", "values": values}
    else:
        model_cfg = {"file": model}
        axis = _axis_config(args, model)
    config = {
        "model": model_cfg,
        "axis": axis,
        "observables": ["e_inf", "var_inf", "snr_inf_density", "k_star"],
        "scheme": _scheme_config(args, model),
    }
    plan = build_plan(config)
    result = run_sweep(plan, workers=args.workers or 1)
    base = _emit(args, result, stdout)
    if args.weights:
        k = momentum_grid(args.weights).points
        rows = [[v, kk, w] for v in plan.axis_values for kk, w in zip(k, saturation_weight(plan.quench(v), k))]
        weights = SweepResult((plan.axis_name, "k", "W"), np.array(rows, dtype=float), dict(result.meta))
        if base is None:
            raise UsageError("--weights requires --out")
        write_table(weights, args.format or "csv", base.with_name(f"{base.name}_weights.{args.format or 'csv'}"))
    if args.svg:
        _svg(base, "", result, plan.axis_name, ["e_inf"], title="saturation energy")


def cmd_snr(args, model, stdout):
    if (args.scheme or "finite") != "finite":
        raise UsageError("snr needs the finite scheme (the SNR rate function is a finite sum)")
    args.scheme = "finite"
    plan, result = _run_series(
        args,
        model,
        ["rate_lambda", "rate_lambda_snr", "variance_kstar", "snr_kstar"],
        stdout,
        scheme_default="finite",
        tmax=5.0,
        nt=2001,
    )
    grouped = len(plan.axis_values) > 1
    result = result if grouped else _drop_axis(result)
    base = _emit(args, result, stdout)
    if args.svg:
        _svg(base, "", result, "t", ["rate_lambda", "rate_lambda_snr"], plan.axis_name if grouped else None, "SNR rate")


def cmd_sweep(args, model, stdout):
    sec = model.sections.get("sweep", {}) if model else {}
    observables = _pick(args.observables, sec, "observables", None)
    if not observables:
        raise UsageError("sweep needs --observables or an 'observables' key in [sweep]")
    if model is None and args.gi is None:
        raise UsageError("--gi is required unless --model is given")
    if model is None:
        model_cfg = {"gi": args.gi, "gf": (args.gf or [1.3])[0]}
    else:
        model_cfg = {"file": model}
    axis = _axis_config(args, model, default_values=args.gf or [1.3])
    if args.param:
        axis["name"] = args.param
    if args.values:
        axis = {"name": axis["name"], "values": args.values}
    config = {
        "model": model_cfg,
        "axis": axis,
        "time": _time_config(args, model),
        "observables": observables,
        "scheme": _scheme_config(args, model),
    }
    modes = sec.get("modes")
    if modes:
        config["modes"] = {"M": int(modes), "include_k_star": True}
    plan = build_plan(config)
    result = run_sweep(plan, workers=args.workers or 1)
    base = _emit(args, result, stdout)
    if args.svg:
        if "t" not in result.columns:
            _svg(base, "", result, plan.axis_name, list(plan.observables))
        elif not plan.mode_resolved:
            group = plan.axis_name if len(plan.axis_values) > 1 else None
            _svg(base, "", result, "t", list(plan.observables), group)


def cmd_dqpt_info(args, model, stdout):
    config = _model_config(args, model)
    q = model.quench() if model else None
    if q is None:
        from .model_core import QuenchSetup

        q = QuenchSetup.tfim(config["gi"], config["gf"])
    try:
        crit = critical_times(q, args.nmax)
    except NoDQPT:
        print("k_star = none (no dynamical quantum phase transition)", file=stdout)
        return
    print(f"k_star = {crit.k_star:.15g}", file=stdout)
    print(f"eps_f_star = {crit.eps_f_star:.15g}", file=stdout)
    for n, t in enumerate(crit.t_c):
        print(f"t_c({n}) = {t:.15g}", file=stdout)
    if args.out:
        rows = np.array([[n, t] for n, t in enumerate(crit.t_c)], dtype=float)
        meta = {"k_star": crit.k_star, "eps_f_star": crit.eps_f_star, "version": __version__}
        _emit(args, SweepResult(("n", "t_c"), rows, meta), stdout)


HANDLERS = {
    "evolve": cmd_evolve,
    "modes": cmd_modes,
    "critical": cmd_critical,
    "saturation": cmd_saturation,
    "snr": cmd_snr,
    "sweep": cmd_sweep,
    "dqpt-info": cmd_dqpt_info,
}


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    """Run the command line; returns the process exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.workers is not None and args.workers < 1:
            raise UsageError("--workers must be >= 1")
        model = _load_model(args)
        HANDLERS[args.command](args, model, stdout)
    except (UsageError, ConfigError) as err:
        print(f"{parser.prog} {args.command}: error: {err}", file=stderr)
        return 2
    except (BatteryError, OSError, ValueError) as err:
        print(f"{parser.prog} {args.command}: computation failed: {err}", file=stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
