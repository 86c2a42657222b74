import math

import numpy as np
import pytest

from dqptbattery import (
    FiniteN,
    QuenchSetup,
    Quadrature,
    density_observables,
    density_series,
    integrate_halfbz,
    mode_observables,
    rate_function,
    saturation_observables,
    snr_rate_function,
)
from dqptbattery.ensemble import gauss_legendre_nodes, panel_count, rate_series, saturation_weight, snr_rate_series
from dqptbattery.errors import NonFinite
from dqptbattery.model_core import momentum_grid, quench_geometry

Q13 = QuenchSetup.tfim(0.0, 1.3)
T_C0 = math.pi / (4 * math.sqrt(1.3**2 - 1))


def midpoint_oracle(f, n=1_000_000):
    k = (np.arange(n) + 0.5) * (math.pi / n)
    return float(np.sum(f(k)) * (math.pi / n))


def test_integrate_examples():
    assert abs(integrate_halfbz(lambda k: np.sin(k) ** 2) - math.pi / 2) < 1e-12
    assert abs(integrate_halfbz(lambda k: np.ones_like(k), t_hint=37.0, eps_max=4.0) - math.pi) < 1e-13

    q = QuenchSetup.tfim(0.0, 0.5)
    weight = lambda k: quench_geometry(q, k).weight_A  # noqa: E731
    assert abs(midpoint_oracle(weight) - math.pi / 8) < 1e-10
    assert abs(integrate_halfbz(weight) - math.pi / 8) < 1e-10


def test_integrate_rejects_non_finite():
    with pytest.raises(NonFinite):
        integrate_halfbz(lambda k: np.where(k > 1, np.nan, 1.0))


def test_integrate_reduces_last_axis():
    out = integrate_halfbz(lambda k: np.stack([np.ones_like(k), np.sin(k)]))
    assert np.allclose(out, [math.pi, 2.0], atol=1e-13)


def test_panel_count_scales_with_time():
    scheme = Quadrature(64, 16)
    assert panel_count(scheme, 0.0, 4.6) == 64
    assert panel_count(scheme, 100.0, 4.6) == math.ceil(10 * 100 * 4.6 / (2 * math.pi))
    assert panel_count(scheme, 1.0, 4.6, floor=1024) == 1024


def test_gauss_legendre_nodes_cover_half_zone():
    k, w = gauss_legendre_nodes(8, 5)
    assert k.shape == w.shape == (40,)
    assert np.all((k > 0) & (k < math.pi)) and abs(w.sum() - math.pi) < 1e-14


def test_zero_time_densities():
    for scheme in (Quadrature(), FiniteN(50)):
        obs = density_observables(Q13, 0.0, scheme)
        assert obs.e_density == obs.p_density == obs.var_density == obs.snr_density == 0.0
        assert obs.rate_lambda == 0.0
    assert density_observables(Q13, 0.0, FiniteN(50)).rate_lambda_snr == 0.0
    assert density_observables(Q13, 0.0).rate_lambda_snr is None


def test_finite_chain_sums_by_hand():
    M = 37
    scheme = FiniteN(M)
    t = 1.7
    modes = [mode_observables(Q13, float(k), t) for k in momentum_grid(M).points]
    N = 2 * M
    e = sum(m.delta_E for m in modes) / N
    var = sum(m.variance for m in modes) / N
    lam = -2.0 / N * sum(math.log(abs(m.loschmidt) ** 2) for m in modes)
    lam_snr = 2.0 / N * sum(math.log1p(m.snr) for m in modes)
    obs = density_observables(Q13, t, scheme)
    assert obs.e_density == pytest.approx(e, rel=1e-13)
    assert obs.var_density == pytest.approx(var, rel=1e-13)
    assert obs.rate_lambda == pytest.approx(lam, rel=1e-12)
    assert obs.rate_lambda_snr == pytest.approx(lam_snr, rel=1e-12)
    assert obs.snr_total == pytest.approx(math.sqrt(N) * obs.snr_density, rel=1e-15)


def test_no_quench_is_trivial():
    q = QuenchSetup.tfim(0.7, 0.7)
    ts = np.linspace(0, 10, 21)
    for t in ts:
        assert abs(rate_function(q, t)) < 1e-14
        assert snr_rate_function(q, t, FiniteN(100)) == 0.0
    sat = saturation_observables(q)
    assert sat.e_inf == 0.0 and sat.var_inf == 0.0


def test_snr_rate_needs_finite_scheme():
    with pytest.raises(TypeError):
        snr_rate_function(Q13, 1.0, Quadrature())


@pytest.mark.parametrize("g_f, expected", [(0.5, 0.125), (1.3, 0.5)])
def test_saturation_examples(g_f, expected):
    q = QuenchSetup.tfim(0.0, g_f)
    oracle = midpoint_oracle(lambda k: quench_geometry(q, k).weight_A) / math.pi
    assert abs(oracle - expected) < 1e-9
    assert abs(saturation_observables(q).e_inf - expected) < 1e-10


def test_saturation_weight_equals_charging_weight_for_ising():
    k = np.linspace(0.01, 3.1, 100)
    q = QuenchSetup.tfim(0.0, 1.7)
    assert np.allclose(saturation_weight(q, k), quench_geometry(q, k).weight_A, atol=1e-15)


def test_saturation_variance_matches_oracle():
    q = QuenchSetup.tfim(0.0, 1.3)

    def integrand(k):
        a = quench_geometry(q, k).weight_A
        return 16 * (a / 2 - 3 * a**2 / 8)

    oracle = midpoint_oracle(integrand) / (2 * math.pi)
    assert abs(saturation_observables(q).var_inf - oracle) < 1e-9


def test_plateau_bound():
    # e(t) = (1/pi) int A sin^2 <= (1/pi) int A = 2 e_inf for the Ising chain from g_i = 0
    for g_f in (0.5, 1.3, 2.0):
        q = QuenchSetup.tfim(0.0, g_f)
        bound = 2 * saturation_observables(q).e_inf
        series = density_series(q, np.linspace(0, 30, 301))
        assert np.all(series["e_density"] <= bound + 1e-12)
        assert np.all(series["e_density"] >= 0)


def test_power_matches_energy_derivative():
    h = 1e-5
    ts = np.linspace(h, 8, 81)
    scheme = Quadrature()
    for t in ts:
        plus = density_observables(Q13, t + h, scheme).e_density
        minus = density_observables(Q13, t - h, scheme).e_density
        assert abs(density_observables(Q13, t, scheme).p_density - (plus - minus) / (2 * h)) < 1e-5


def test_finite_chain_converges_to_quadrature():
    ts = np.linspace(0, 8, 81)
    quad = density_series(Q13, ts, Quadrature())
    fin = density_series(Q13, ts, FiniteN(4000))
    assert np.max(np.abs(quad["e_density"] - fin["e_density"])) < 1e-4


def test_rate_function_cusp_positions():
    t = np.linspace(0, 5, 2001)
    lam = rate_series(Q13, t)
    near = np.abs(t - T_C0) < 0.05
    assert t[near][np.argmax(lam[near])] == pytest.approx(T_C0, abs=2 * (t[1] - t[0]))


def test_snr_rate_peaks_near_first_odd_critical_times():
    # supplementary: the SNR rate tracks the Loschmidt rate near t_c and 3 t_c
    t = np.linspace(0, 5, 2001)
    step = t[1] - t[0]
    lam_snr = snr_rate_series(Q13, t, FiniteN(2000))
    interior = np.arange(1, len(t) - 1)
    peaks = t[interior[(lam_snr[interior] > lam_snr[interior - 1]) & (lam_snr[interior] >= lam_snr[interior + 1])]]
    for target in (T_C0, 3 * T_C0):
        assert np.min(np.abs(peaks - target)) <= 2 * step


def test_density_series_columns():
    s = density_series(Q13, [0.0, 1.0], FiniteN(10))
    assert set(s) == {"t", "e_density", "p_density", "var_density", "snr_density", "rate_lambda", "rate_lambda_snr", "snr_total"}
    assert "rate_lambda_snr" not in density_series(Q13, [0.0, 1.0])
