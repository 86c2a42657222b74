import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dqptbattery import (
    ModelDefinition,
    QuenchSetup,
    compile_model,
    critical_momentum,
    critical_times,
    detect_cusps,
    mode_observables,
    onset_scan,
    quench_geometry,
)
from dqptbattery.dqpt import has_dqpt, scan_critical_momenta, tfim_critical_momentum
from dqptbattery.ensemble import rate_series
from dqptbattery.errors import NoDQPT, TooFewSamples
from dqptbattery.model_core import bloch


def _dsl_ising(g_i, g_f):
    text = {"d2": "2*sin(k)", "d3": "2*(g - cos(k))"}
    return QuenchSetup(
        compile_model(ModelDefinition.from_strings(**text, g=g_i)),
        compile_model(ModelDefinition.from_strings(**text, g=g_f)),
    )


def _bisect_cos_theta(q, lo=1e-9, hi=math.pi - 1e-9):
    # oracle: plain bisection on the sign of the Bloch-vector overlap
    f = lambda k: quench_geometry(q, k).cos_theta  # noqa: E731
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sign(f(mid)) == np.sign(flo):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_critical_momentum_examples():
    q = QuenchSetup.tfim(0.0, 1.3)
    assert critical_momentum(q) == pytest.approx(math.acos(1 / 1.3), abs=1e-15)
    assert abs(critical_momentum(q) - _bisect_cos_theta(q)) < 1e-12
    assert critical_momentum(QuenchSetup.tfim(0.0, 0.9)) is None
    assert critical_momentum(QuenchSetup.tfim(0.0, 1.0)) is None
    assert tfim_critical_momentum(0.5, -0.5) is None


def test_critical_times_examples():
    q = QuenchSetup.tfim(0.0, 1.3)
    data = critical_times(q)
    eps_oracle = float(bloch(q.final, _bisect_cos_theta(q))[1])
    assert data.eps_f_star == pytest.approx(2 * math.sqrt(0.69), abs=1e-14)
    assert data.t_c[0] == pytest.approx(math.pi / (2 * eps_oracle), abs=1e-12)
    assert data.t_c[0] == pytest.approx(math.pi / (4 * math.sqrt(0.69)), abs=1e-15)
    assert data.t_c[1] == pytest.approx(3 * data.t_c[0], rel=1e-15)
    assert len(data.t_c) == 5
    with pytest.raises(NoDQPT):
        critical_times(QuenchSetup.tfim(0.0, 0.5))
    assert not has_dqpt(QuenchSetup.tfim(0.0, 0.5))


def test_onset_scan_examples():
    (edge,) = onset_scan(0.0, (0.2, 2.0), 19)
    assert abs(edge - 1.0) < 1e-9
    assert onset_scan(0.0, (1.1, 2.0), 10) == []


def test_onset_scan_from_half_field():
    # oracle: sign scan of |arg| - 1 for arg = (1 + 0.5 g) / (0.5 + g)
    g = np.linspace(0.2, 3.0, 280000)
    excess = np.abs((1 + 0.5 * g) / (0.5 + g)) - 1
    flips = g[np.flatnonzero(np.diff(np.sign(excess)) != 0)]
    assert len(flips) == 1 and abs(flips[0] - 1.0) < 1e-4
    (edge,) = onset_scan(0.5, (0.2, 3.0), 29)
    assert abs(edge - 1.0) < 1e-9


pairs = st.tuples(st.floats(-3, 3), st.floats(-3, 3)).filter(
    lambda p: tfim_critical_momentum(*p) is not None and 1e-3 < tfim_critical_momentum(*p) < math.pi - 1e-3
)


@given(pairs)
def test_weight_is_maximal_at_critical_momentum(pair):
    q = QuenchSetup.tfim(*pair)
    assert abs(quench_geometry(q, critical_momentum(q)).weight_A - 1) < 1e-10


@given(pairs, st.integers(0, 4))
def test_critical_mode_optimality(pair, n):
    q = QuenchSetup.tfim(*pair)
    data = critical_times(q)
    obs = mode_observables(q, data.k_star, data.t_c[n])
    eps_i = quench_geometry(q, data.k_star).eps_i
    assert abs(obs.delta_E - 2 * eps_i) < 1e-9
    assert abs(obs.power) < 1e-9
    assert abs(obs.loschmidt) < 1e-10


def test_closed_form_matches_root_finder(rng):
    checked = 0
    while checked < 100:
        g_i, g_f = rng.uniform(-3, 3, 2)
        closed = tfim_critical_momentum(g_i, g_f)
        if closed is None:
            continue
        search = scan_critical_momenta(_dsl_ising(g_i, g_f))
        assert search.sign_changes == 1
        assert abs(closed - search.k_star) < 1e-10
        checked += 1


def test_generic_model_reports_all_sign_changes():
    initial = ModelDefinition.from_strings(d3="1")
    final = ModelDefinition.from_strings(d2="1", d3="cos(2*k)")
    q = QuenchSetup(compile_model(initial), compile_model(final))
    search = scan_critical_momenta(q)
    assert search.sign_changes == 2
    assert abs(search.k_star - math.pi / 4) < 1e-10
    assert critical_momentum(q) == search.k_star


def test_generic_model_without_root():
    q = QuenchSetup(compile_model(ModelDefinition.from_strings(d3="1")), compile_model(ModelDefinition.from_strings(d2="1", d3="2")))
    assert scan_critical_momenta(q) == (None, 0)
    with pytest.raises(NoDQPT):
        critical_times(q)


@pytest.mark.parametrize("g_f", [1.2, 1.3, 1.5, 2.0])
def test_cusps_match_critical_times(g_f):
    q = QuenchSetup.tfim(0.0, g_f)
    t = np.linspace(0, 5, 2001)
    step = t[1] - t[0]
    cusps = np.array(detect_cusps(t, rate_series(q, t)))
    expected = [tc for tc in critical_times(q, n_max=20).t_c if tc < t[-1] - 2 * step]
    assert len(cusps) == len(expected)
    assert np.all(np.abs(cusps - np.array(expected)) <= 2 * step)


def test_no_cusps_in_smooth_or_constant_series():
    t = np.linspace(0, 5, 2001)
    assert detect_cusps(t, np.sin(t) ** 2) == []
    assert detect_cusps(t, np.full_like(t, 0.3)) == []


def test_cusp_detection_sample_requirements():
    with pytest.raises(TooFewSamples):
        detect_cusps(np.linspace(0, 1, 15), np.zeros(15))
    with pytest.raises(ValueError):
        detect_cusps(np.geomspace(1, 2, 40), np.zeros(40))


def test_cusp_detection_on_synthetic_kink():
    t = np.linspace(0, 4, 401)
    lam = 1 - np.abs(t - 1.5) + 0.1 * np.sin(t)
    (cusp,) = detect_cusps(t, lam)
    assert abs(cusp - 1.5) <= 0.01
