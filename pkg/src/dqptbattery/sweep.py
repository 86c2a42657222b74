"""
Deterministic parameter sweeps.

A plan is one parameter axis times one time axis. Each (parameter, time)
cell is computed independently and written into a preallocated table by
index, so the result does not depend on the number of worker threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import __version__
from .dqpt import critical_momentum, critical_times
from .dsl import ModelFile, compile_model
from .dynamics import mode_observables
from .ensemble import (
    DensityEvaluator,
    FiniteN,
    Quadrature,
    EvaluationScheme,
    saturation_observables,
    snr_ratio,
)
from .errors import ConfigError, NoDQPT, NonFinite
from .model_core import QuenchSetup, momentum_grid

DENSITY_OBSERVABLES = ("e_density", "p_density", "var_density", "snr_density", "rate_lambda", "rate_lambda_snr")
CRITICAL_MODE_OBSERVABLES = ("delta_E_kstar", "power_kstar", "loschmidt_abs_kstar", "variance_kstar", "snr_kstar")
STATIC_OBSERVABLES = ("e_inf", "var_inf", "snr_inf_density", "k_star", "eps_f_star", "t_c0")
MODE_OBSERVABLES = ("mode_delta_E", "mode_power", "mode_loschmidt_abs", "mode_exc_prob", "mode_variance", "mode_snr")
TIME_OBSERVABLES = DENSITY_OBSERVABLES + CRITICAL_MODE_OBSERVABLES
ALL_OBSERVABLES = TIME_OBSERVABLES + STATIC_OBSERVABLES + MODE_OBSERVABLES

DEFAULT_SCHEME = Quadrature(panels_base=64, nodes_per_panel=16)


@dataclass(frozen=True)
class SweepPlan:
    axis_name: str
    axis_values: tuple[float, ...]
    t0: float
    t1: float
    nt: int
    observables: tuple[str, ...]
    scheme: EvaluationScheme = DEFAULT_SCHEME
    gi: float = 0.0
    gf: float = 1.3
    model: ModelFile | None = None
    time_unit: str = "abs"
    mode_count: int = 400
    include_k_star: bool = False

    @property
    def mode_resolved(self) -> bool:
        return any(o in MODE_OBSERVABLES for o in self.observables)

    @property
    def time_dependent(self) -> bool:
        return self.mode_resolved or any(o in TIME_OBSERVABLES for o in self.observables)

    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.nt)

    def columns(self) -> tuple[str, ...]:
        coords = (self.axis_name, "t", "k") if self.mode_resolved else (
            (self.axis_name, "t") if self.time_dependent else (self.axis_name,)
        )
        return coords + self.observables

    def quench(self, value: float) -> QuenchSetup:
        """Quench with the swept parameter set to ``value``."""
        if self.model is None:
            gi, gf = (value, self.gf) if self.axis_name == "gi" else (self.gi, value)
            return QuenchSetup.tfim(gi, gf)
        section, name = _split_axis(self.axis_name)
        initial, final = self.model.initial, self.model.final
        if section == "initial":
            initial = initial.with_params(**{name: value})
        if section == "final":
            final = final.with_params(**{name: value})
        return QuenchSetup(compile_model(initial), compile_model(final))

    def echo(self) -> dict[str, Any]:
        scheme = (
            {"kind": "finite", "M": self.scheme.M}
            if isinstance(self.scheme, FiniteN)
            else {
                "kind": "quad",
                "panels": self.scheme.panels_base,
                "nodes": self.scheme.nodes_per_panel,
                "log_panels": self.scheme.log_panels,
            }
        )
        out = {
            "axis": {"name": self.axis_name, "values": list(self.axis_values)},
            "time": {"t0": self.t0, "t1": self.t1, "nt": self.nt, "unit": self.time_unit},
            "observables": list(self.observables),
            "scheme": scheme,
        }
        if self.model is None:
            out["model"] = {"kind": "tfim", "gi": self.gi, "gf": self.gf}
        else:
            out["model"] = {
                "kind": "dsl",
                "initial_params": dict(self.model.initial.params),
                "final_params": dict(self.model.final.params),
            }
        if self.mode_resolved:
            out["modes"] = {"M": self.mode_count, "include_k_star": self.include_k_star}
        return out


def _split_axis(name):
    if name.startswith("initial."):
        return "initial", name[len("initial."):]
    if name.startswith("final."):
        return "final", name[len("final."):]
    return "final", name


@dataclass
class SweepResult:
    columns: tuple[str, ...]
    rows: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]


# ---------------------------------------------------------------- plan building


def _as_float(value, name, problems):
    try:
        out = float(value)
    except (TypeError, ValueError):
        problems.append(f"{name}: not a number ({value!r})")
        return None
    if not math.isfinite(out):
        problems.append(f"{name}: must be finite")
        return None
    return out


def _as_int(value, name, problems, minimum=1):
    try:
        out = int(value)
        if out != float(value):
            raise ValueError
    except (TypeError, ValueError):
        problems.append(f"{name}: not an integer ({value!r})")
        return None
    if out < minimum:
        problems.append(f"{name}: must be >= {minimum}")
        return None
    return out


def _build_scheme(cfg: Mapping, problems) -> EvaluationScheme:
    kind = str(cfg.get("kind", "quad"))
    if kind == "finite":
        M = cfg.get("M")
        if M is None and "N" in cfg:
            N = _as_int(cfg["N"], "scheme.N", problems, minimum=2)
            if N is not None and N % 2:
                problems.append("scheme.N: site count must be even")
            M = None if N is None else N // 2
        elif M is None:
            problems.append("scheme.M: required for finite scheme")
        M = _as_int(M, "scheme.M", problems) if M is not None else None
        return FiniteN(M) if M else DEFAULT_SCHEME
    if kind != "quad":
        problems.append(f"scheme.kind: expected 'quad' or 'finite', got {kind!r}")
        return DEFAULT_SCHEME
    panels = _as_int(cfg.get("panels", 64), "scheme.panels", problems)
    nodes = _as_int(cfg.get("nodes", 16), "scheme.nodes", problems)
    log_panels = _as_int(cfg.get("log_panels", 1024), "scheme.log_panels", problems)
    if None in (panels, nodes, log_panels):
        return DEFAULT_SCHEME
    return Quadrature(panels, nodes, log_panels)


def build_plan(config: Mapping[str, Any]) -> SweepPlan:
    """Resolve a parsed configuration into a SweepPlan.

    Recognised keys: ``model`` (``{"gi", "gf"}`` for the Ising chain or
    ``{"file": ModelFile}``), ``axis`` (``name`` plus ``values`` or
    ``start``/``stop``/``steps``), ``time`` (``t0``, ``t1``, ``nt``,
    ``unit``), ``observables``, ``scheme`` and ``modes`` (``M``,
    ``include_k_star``). Every invalid field is reported in one ConfigError.
    """
    problems: list[str] = []
    known = {"model", "axis", "time", "observables", "scheme", "modes"}
    for key in config:
        if key not in known:
            problems.append(f"{key}: unknown section")

    model_cfg = dict(config.get("model", {}))
    model = model_cfg.get("file")
    gi = _as_float(model_cfg.get("gi", 0.0), "model.gi", problems)
    gf = _as_float(model_cfg.get("gf", 1.3), "model.gf", problems)
    if model is not None and not isinstance(model, ModelFile):
        problems.append("model.file: expected a parsed model file")
        model = None

    axis_cfg = dict(config.get("axis", {}))
    axis_name = str(axis_cfg.get("name", "gf"))
    if model is None and axis_name not in ("gf", "gi"):
        problems.append(f"axis.name: Ising sweeps vary 'gf' or 'gi', got {axis_name!r}")
    if model is not None:
        section, pname = _split_axis(axis_name)
        target = model.initial if section == "initial" else model.final
        if pname not in target.params:
            problems.append(f"axis.name: parameter {pname!r} is not declared in [{section}]")
    if "values" in axis_cfg:
        raw = axis_cfg["values"]
        if isinstance(raw, (int, float)):
            raw = [raw]
        values = [_as_float(v, "axis.values", problems) for v in raw]
        if not values:
            problems.append("axis.values: empty")
    elif "start" in axis_cfg:
        start = _as_float(axis_cfg.get("start"), "axis.start", problems)
        stop = _as_float(axis_cfg.get("stop", start), "axis.stop", problems)
        steps = _as_int(axis_cfg.get("steps", 1), "axis.steps", problems)
        values = list(np.linspace(start, stop, steps)) if None not in (start, stop, steps) else []
    else:
        default = gi if axis_name == "gi" else gf
        if model is not None:
            section, pname = _split_axis(axis_name)
            target = model.initial if section == "initial" else model.final
            default = target.params.get(pname, 0.0)
        values = [default]
    values = tuple(float(v) for v in values if v is not None)

    time_cfg = dict(config.get("time", {}))
    t0 = _as_float(time_cfg.get("t0", 0.0), "time.t0", problems)
    t1 = _as_float(time_cfg.get("t1", t0 if t0 is not None else 0.0), "time.t1", problems)
    nt = _as_int(time_cfg.get("nt", 1), "time.nt", problems)
    unit = str(time_cfg.get("unit", "abs"))
    if unit not in ("abs", "tc"):
        problems.append(f"time.unit: expected 'abs' or 'tc', got {unit!r}")
    if t0 is not None and t0 < 0:
        problems.append("time.t0: must be non-negative")
    if None not in (t0, t1) and t1 < t0:
        problems.append("time.t1: must be >= t0")

    observables = config.get("observables", ())
    if isinstance(observables, str):
        observables = [o.strip() for o in observables.split(",") if o.strip()]
    observables = tuple(observables)
    if not observables:
        problems.append("observables: at least one observable is required")
    for name in observables:
        if name not in ALL_OBSERVABLES:
            problems.append(f"observables: unknown observable {name!r}")
    if len(set(observables)) != len(observables):
        problems.append("observables: duplicates")
    if any(o in MODE_OBSERVABLES for o in observables) and not all(o in MODE_OBSERVABLES for o in observables):
        problems.append("observables: mode-resolved grids cannot be mixed with other observables")

    scheme = _build_scheme(dict(config.get("scheme", {})), problems)
    if "rate_lambda_snr" in observables and not isinstance(scheme, FiniteN):
        problems.append("observables: rate_lambda_snr requires a finite scheme")

    modes_cfg = dict(config.get("modes", {}))
    mode_count = _as_int(modes_cfg.get("M", 400), "modes.M", problems)
    include_k_star = bool(modes_cfg.get("include_k_star", False))

    if problems:
        raise ConfigError(problems)
    return SweepPlan(
        axis_name=axis_name,
        axis_values=values,
        t0=t0,
        t1=t1,
        nt=nt,
        observables=observables,
        scheme=scheme,
        gi=gi,
        gf=gf,
        model=model,
        time_unit=unit,
        mode_count=mode_count,
        include_k_star=include_k_star,
    )


# ---------------------------------------------------------------- execution


class _ParamContext:
    """Everything about one parameter value that does not depend on time."""

    def __init__(self, plan: SweepPlan, value: float):
        self.value = value
        self.q = plan.quench(value)
        self.evaluator = DensityEvaluator(self.q, plan.scheme)
        self.k_star = critical_momentum(self.q)
        needs_tc = plan.time_unit == "tc" or "t_c0" in plan.observables or "eps_f_star" in plan.observables
        self.crit = critical_times(self.q, 0) if (needs_tc and self.k_star is not None) else None
        if plan.time_unit == "tc" and self.crit is None:
            raise NoDQPT(f"time unit 'tc' needs a DQPT, none at {plan.axis_name}={value!r}")
        self.time_scale = self.crit.t_c[0] if plan.time_unit == "tc" else 1.0
        self.static = self._static(plan)
        if plan.mode_resolved:
            k = momentum_grid(plan.mode_count).points
            if plan.include_k_star and self.k_star is not None and self.k_star not in k:
                k = np.sort(np.append(k, self.k_star))
            self.k = k

    def _static(self, plan):
        wanted = [o for o in plan.observables if o in STATIC_OBSERVABLES]
        out = {}
        if any(o in ("e_inf", "var_inf", "snr_inf_density") for o in wanted):
            sat = saturation_observables(self.q, plan.scheme)
            out.update(e_inf=sat.e_inf, var_inf=sat.var_inf, snr_inf_density=sat.snr_inf_density)
        nan = float("nan")
        out["k_star"] = nan if self.k_star is None else self.k_star
        out["eps_f_star"] = self.crit.eps_f_star if self.crit else nan
        out["t_c0"] = self.crit.t_c[0] if self.crit else nan
        return out


def _time_cell(plan: SweepPlan, ctx: _ParamContext, t_unit: float) -> list[float]:
    t = t_unit * ctx.time_scale
    wanted = set(plan.observables)
    values: dict[str, float] = {}
    if wanted & {"e_density", "p_density", "var_density", "snr_density"}:
        e, p, var = ctx.evaluator.energy_terms(t)
        values.update(e_density=e, p_density=p, var_density=var)
        values["snr_density"] = snr_ratio(e, var)
    if "rate_lambda" in wanted:
        values["rate_lambda"] = ctx.evaluator.rate(t)
    if "rate_lambda_snr" in wanted:
        values["rate_lambda_snr"] = ctx.evaluator.snr_rate(t)
    if wanted & set(CRITICAL_MODE_OBSERVABLES):
        if ctx.k_star is None:
            values.update(dict.fromkeys(CRITICAL_MODE_OBSERVABLES, float("nan")))
        else:
            mo = mode_observables(ctx.q, ctx.k_star, t)
            values.update(
                delta_E_kstar=mo.delta_E,
                power_kstar=mo.power,
                loschmidt_abs_kstar=abs(mo.loschmidt),
                variance_kstar=mo.variance,
                snr_kstar=mo.snr,
            )
    values.update(ctx.static)
    return [ctx.value, t_unit] + [float(values[o]) for o in plan.observables]


def _mode_cell(plan: SweepPlan, ctx: _ParamContext, t_unit: float) -> np.ndarray:
    t = t_unit * ctx.time_scale
    mo = mode_observables(ctx.q, ctx.k, t)
    table = {
        "mode_delta_E": mo.delta_E,
        "mode_power": mo.power,
        "mode_loschmidt_abs": np.abs(mo.loschmidt),
        "mode_exc_prob": mo.exc_prob,
        "mode_variance": mo.variance,
        "mode_snr": mo.snr,
    }
    n = len(ctx.k)
    cols = [np.full(n, ctx.value), np.full(n, t_unit), ctx.k] + [table[o] for o in plan.observables]
    return np.column_stack(cols)


def run_sweep(plan: SweepPlan, workers: int = 1) -> SweepResult:
    """Evaluate every cell of ``plan``; rows ordered by (parameter, time[, k])."""
    start = time.perf_counter()
    columns = plan.columns()
    contexts = []
    for value in plan.axis_values:
        try:
            contexts.append(_ParamContext(plan, value))
        except NonFinite as err:
            raise NonFinite("non-finite value", {plan.axis_name: value}) from err

    if not plan.time_dependent:
        rows = np.array(
            [[ctx.value] + [float(ctx.static[o]) for o in plan.observables] for ctx in contexts],
            dtype=float,
        ).reshape(len(contexts), len(columns))
        return SweepResult(columns, rows, _meta(plan, start))

    times = plan.times()
    cells = [(p, j) for p in range(len(contexts)) for j in range(len(times))]
    sizes = [len(contexts[p].k) if plan.mode_resolved else 1 for p, _ in cells]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    rows = np.empty((int(offsets[-1]), len(columns)), dtype=float)

    def compute(index):
        p, j = cells[index]
        ctx = contexts[p]
        try:
            if plan.mode_resolved:
                block = _mode_cell(plan, ctx, float(times[j]))
            else:
                block = np.asarray([_time_cell(plan, ctx, float(times[j]))])
        except NonFinite as err:
            raise NonFinite("non-finite value", {plan.axis_name: ctx.value, "t": float(times[j])}) from err
        rows[offsets[index]:offsets[index + 1]] = block

    if workers <= 1:
        for i in range(len(cells)):
            compute(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(compute, range(len(cells))))
    return SweepResult(columns, rows, _meta(plan, start))


def _meta(plan, start):
    return {"plan": plan.echo(), "version": __version__, "wall_time": time.perf_counter() - start}
