"""
Momentum sums and thermodynamic-limit integrals over the half Brillouin zone.

Both evaluation schemes reduce to a weighted node set ``(k_j, w_j)`` on
``(0, pi)`` with ``sum(w_j) = pi``:

* ``FiniteN(M)`` uses the midpoint grid with ``w_j = pi / M``, i.e. the sum
  over the ``M = N/2`` positive momenta of an ``N``-site chain.
* ``Quadrature`` uses composite Gauss-Legendre panels whose count grows with
  time so that ``sin(2 eps_f t)`` stays resolved.

Densities per site then read ``(1/2pi) * sum_j w_j X_k`` for an extensive
mode quantity ``X_k``; the rate functions use ``(1/pi) * sum_j w_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NonFinite
from .model_core import QuenchSetup, bloch, momentum_grid, quench_geometry
from .dynamics import SNR_FLOOR

LOG_FLOOR = 1e-30


@dataclass(frozen=True)
class FiniteN:
    """Finite chain of ``N = 2M`` sites, summed over ``M`` positive momenta."""

    M: int

    def __post_init__(self):
        momentum_grid(self.M)

    @property
    def N(self) -> int:
        return 2 * self.M


@dataclass(frozen=True)
class Quadrature:
    """Composite Gauss-Legendre rule on ``[0, pi]``.

    ``log_panels`` is the panel floor used for the logarithmic Loschmidt
    integrand, whose near-singular dip at a critical mode needs far finer
    resolution than the smooth energy integrands.
    """

    panels_base: int = 64
    nodes_per_panel: int = 16
    log_panels: int = 1024

    def __post_init__(self):
        for name in ("panels_base", "nodes_per_panel", "log_panels"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")


EvaluationScheme = Union[FiniteN, Quadrature]


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    x, w = leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def gauss_legendre_nodes(panels: int, nodes_per_panel: int):
    """Nodes and weights of the composite rule with ``panels`` equal panels on ``[0, pi]``."""
    x, w = _gauss_legendre(nodes_per_panel)
    edges = np.linspace(0.0, np.pi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    k = (mid + half * x).ravel()
    weights = (half * w).ravel()
    k.setflags(write=False)
    weights.setflags(write=False)
    return k, weights


def panel_count(scheme: Quadrature, t_hint: float, eps_max: float, floor: int | None = None) -> int:
    """Return ``max(base, ceil(10 t eps_max / 2pi))``, about ten nodes per oscillation period."""
    base = scheme.panels_base if floor is None else max(scheme.panels_base, floor)
    return max(base, int(math.ceil(10.0 * t_hint * eps_max / (2.0 * math.pi))))


def integrate_halfbz(
    f: Callable[[np.ndarray], np.ndarray],
    t_hint: float = 0.0,
    scheme: Quadrature | None = None,
    eps_max: float = 0.0,
):
    """Integrate ``f`` over ``(0, pi)`` with the composite Gauss-Legendre rule.

    ``f`` receives the node array and may return extra leading axes; the
    last axis is reduced. ``eps_max`` is the largest final band energy and
    together with ``t_hint`` sets the panel count.
    """
    scheme = scheme or Quadrature()
    panels = panel_count(scheme, t_hint, eps_max)
    k, w = gauss_legendre_nodes(panels, scheme.nodes_per_panel)
    values = np.asarray(f(k), dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFinite("integrand is not finite", {"t": t_hint})
    out = np.sum(values * w, axis=-1)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- node cache


class _Nodes:
    """Quench geometry at a node set, computed once and reused across times."""

    def __init__(self, q: QuenchSetup, k: np.ndarray, w: np.ndarray):
        self.k = k
        self.w = w
        geo = quench_geometry(q, k)
        self.eps_i = geo.eps_i
        self.eps_f = geo.eps_f
        self.cos_theta = geo.cos_theta
        self.weight = geo.weight_A

    def sum(self, values, t):
        if not np.all(np.isfinite(values)):
            raise NonFinite("integrand is not finite", {"t": float(t)})
        return float(np.sum(values * self.w))


class DensityEvaluator:
    """Reusable evaluator for one quench and scheme.

    Node geometry is cached per panel count; the cache is safe to share
    between threads because entries are immutable and only ever replaced.
    """

    def __init__(self, q: QuenchSetup, scheme: EvaluationScheme):
        self.q = q
        self.scheme = scheme
        self._cache: dict[int, _Nodes] = {}
        if isinstance(scheme, Quadrature):
            k, _ = gauss_legendre_nodes(scheme.panels_base, scheme.nodes_per_panel)
            self.eps_max = float(np.max(bloch(q.final, k)[1]))
        else:
            self.eps_max = 0.0

    def nodes(self, t: float, log: bool = False) -> _Nodes:
        if isinstance(self.scheme, FiniteN):
            key = 0
        else:
            floor = self.scheme.log_panels if log else None
            key = panel_count(self.scheme, t, self.eps_max, floor)
        nodes = self._cache.get(key)
        if nodes is None:
            if isinstance(self.scheme, FiniteN):
                k = momentum_grid(self.scheme.M).points
                nodes = _Nodes(self.q, k, np.full(k.shape, np.pi / self.scheme.M))
            else:
                k, w = gauss_legendre_nodes(key, self.scheme.nodes_per_panel)
                nodes = _Nodes(self.q, k, w)
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = nodes
        return nodes

    def energy_terms(self, t):
        nd = self.nodes(t)
        phase = nd.eps_f * t
        exc = nd.weight * np.sin(phase) ** 2
        e = nd.sum(2 * nd.eps_i * exc, t) / (2 * np.pi)
        p = nd.sum(2 * nd.eps_i * nd.eps_f * nd.weight * np.sin(2 * phase), t) / (2 * np.pi)
        var = nd.sum(4 * nd.eps_i**2 * exc * (1 - exc), t) / (2 * np.pi)
        return e, p, var

    def rate(self, t):
        nd = self.nodes(t, log=True)
        phase = nd.eps_f * t
        surv = np.cos(phase) ** 2 + (np.sin(phase) * nd.cos_theta) ** 2
        return -nd.sum(np.log(np.maximum(surv, LOG_FLOOR)), t) / np.pi

    def snr_rate(self, t):
        if not isinstance(self.scheme, FiniteN):
            raise TypeError("the SNR rate function is defined only for FiniteN schemes")
        nd = self.nodes(t)
        exc = nd.weight * np.sin(nd.eps_f * t) ** 2
        delta_e = 2 * nd.eps_i * exc
        variance = 4 * nd.eps_i**2 * exc * (1 - exc)
        snr = delta_e / np.maximum(np.sqrt(variance), SNR_FLOOR)
        return nd.sum(np.log1p(snr), t) / np.pi


# ---------------------------------------------------------------- densities


@dataclass(frozen=True)
class DensityObservables:
    """Per-site observables at time ``t``.

    ``rate_lambda_snr`` and ``snr_total`` (the extensive ratio
    ``sqrt(N) * snr_density``) exist only for FiniteN schemes and are None
    otherwise.
    """

    t: float
    e_density: float
    p_density: float
    var_density: float
    snr_density: float
    rate_lambda: float
    rate_lambda_snr: float | None = None
    snr_total: float | None = None


def snr_ratio(signal: float, variance: float) -> float:
    """Return ``signal / sqrt(variance)``, or 0 when both vanish."""
    if signal == 0.0 and variance <= 0.0:
        return 0.0
    return signal / math.sqrt(variance) if variance > 0.0 else math.inf


def _density(ev: DensityEvaluator, t: float) -> DensityObservables:
    if not t >= 0:
        raise ValueError("time must be non-negative")
    e, p, var = ev.energy_terms(t)
    snr = snr_ratio(e, var)
    finite = isinstance(ev.scheme, FiniteN)
    return DensityObservables(
        t=float(t),
        e_density=e,
        p_density=p,
        var_density=var,
        snr_density=snr,
        rate_lambda=ev.rate(t),
        rate_lambda_snr=ev.snr_rate(t) if finite else None,
        snr_total=math.sqrt(ev.scheme.N) * snr if finite else None,
    )


def density_observables(q: QuenchSetup, t: float, scheme: EvaluationScheme | None = None) -> DensityObservables:
    """Energy, power, variance and SNR densities plus rate functions at time ``t``."""
    return _density(DensityEvaluator(q, scheme or Quadrature()), float(t))


def density_series(q: QuenchSetup, times, scheme: EvaluationScheme | None = None) -> dict[str, np.ndarray]:
    """Column-wise ``density_observables`` over ``times``, reusing node geometry."""
    ev = DensityEvaluator(q, scheme or Quadrature())
    rows = [_density(ev, float(t)) for t in np.asarray(times, dtype=float)]
    names = ("t", "e_density", "p_density", "var_density", "snr_density", "rate_lambda")
    out = {name: np.array([getattr(r, name) for r in rows]) for name in names}
    if isinstance(ev.scheme, FiniteN):
        out["rate_lambda_snr"] = np.array([r.rate_lambda_snr for r in rows])
        out["snr_total"] = np.array([r.snr_total for r in rows])
    return out


def rate_function(q: QuenchSetup, t: float, scheme: EvaluationScheme | None = None) -> float:
    """Loschmidt rate ``-(1/pi) int ln|G_k(t)|^2 dk`` (or its finite-N sum)."""
    if not t >= 0:
        raise ValueError("time must be non-negative")
    return DensityEvaluator(q, scheme or Quadrature()).rate(float(t))


def rate_series(q: QuenchSetup, times, scheme: EvaluationScheme | None = None) -> np.ndarray:
    ev = DensityEvaluator(q, scheme or Quadrature())
    return np.array([ev.rate(float(t)) for t in np.asarray(times, dtype=float)])


def snr_rate_function(q: QuenchSetup, t: float, scheme: FiniteN) -> float:
    """Return ``(2/N) sum_k ln(1 + R_SNR,k(t))`` over the positive momenta of an N-site chain."""
    if not isinstance(scheme, FiniteN):
        raise TypeError("snr_rate_function requires a FiniteN scheme")
    if not t >= 0:
        raise ValueError("time must be non-negative")
    return DensityEvaluator(q, scheme).snr_rate(float(t))


def snr_rate_series(q: QuenchSetup, times, scheme: FiniteN) -> np.ndarray:
    if not isinstance(scheme, FiniteN):
        raise TypeError("snr_rate_series requires a FiniteN scheme")
    ev = DensityEvaluator(q, scheme)
    return np.array([ev.snr_rate(float(t)) for t in np.asarray(times, dtype=float)])


# ---------------------------------------------------------------- saturation


@dataclass(frozen=True)
class SaturationObservables:
    e_inf: float
    var_inf: float
    snr_inf_density: float


def saturation_weight(q: QuenchSetup, k):
    """Mode-resolved plateau weight ``W(k) = eps_i A / 2``, so that ``e_inf = (1/pi) int W``.

    Reduces to ``A(k)`` for the Ising chain, where ``eps_i = 2``.
    """
    geo = quench_geometry(q, k)
    return 0.5 * geo.eps_i * geo.weight_A


def saturation_observables(q: QuenchSetup, scheme: EvaluationScheme | None = None) -> SaturationObservables:
    """Long-time (dephased) plateau values of the energy and variance densities."""
    nd = DensityEvaluator(q, scheme or Quadrature()).nodes(0.0)
    e_inf = nd.sum(nd.eps_i * nd.weight, 0.0) / (2 * np.pi)
    var_inf = nd.sum(4 * nd.eps_i**2 * (nd.weight / 2 - 3 * nd.weight**2 / 8), 0.0) / (2 * np.pi)
    return SaturationObservables(e_inf, var_inf, snr_ratio(e_inf, var_inf))
