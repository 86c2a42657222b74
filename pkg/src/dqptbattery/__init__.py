"""Momentum-resolved simulation of quench-charged free-fermion quantum batteries."""

__version__ = "0.1.0"

from .model_core import (  # noqa: E402
    BlochVector,
    ModeGeometry,
    MomentumGrid,
    QuenchSetup,
    TwoBandSpec,
    evaluate_mode,
    momentum_grid,
    quench_geometry,
    tfim_spec,
)
from .dynamics import (  # noqa: E402
    ModeObservables,
    loschmidt_amplitude,
    mode_observables,
    propagator_closed,
    propagator_ode_oracle,
)
from .ensemble import (  # noqa: E402
    DensityObservables,
    FiniteN,
    Quadrature,
    SaturationObservables,
    density_observables,
    density_series,
    integrate_halfbz,
    rate_function,
    saturation_observables,
    snr_rate_function,
)
from .dqpt import critical_momentum, critical_times, detect_cusps, onset_scan  # noqa: E402
from .dsl import ModelDefinition, compile_model, evaluate_expr, parse_expression, parse_model_file  # noqa: E402
from .sweep import SweepPlan, SweepResult, build_plan, run_sweep  # noqa: E402
