"""
Dynamical quantum phase transitions of a two-band quench.

A critical momentum ``k*`` is a zero of ``cos_theta(k) = dhat_i . dhat_f``.
There the mode is fully charged at the critical times
``t_c^(n) = (2n + 1) pi / (2 eps_f(k*))`` and the Loschmidt amplitude
vanishes, so the rate function develops cusps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import bisect

from .errors import NoDQPT, TooFewSamples
from .model_core import QuenchSetup, quench_geometry

SCAN_INTERVALS = 1024
K_TOL = 1e-12


class CriticalSearch(NamedTuple):
    """Smallest critical momentum (or None) and the number of sign changes seen."""

    k_star: float | None
    sign_changes: int


@dataclass(frozen=True)
class CriticalData:
    k_star: float
    eps_f_star: float
    t_c: tuple[float, ...]


def _cos_theta(q: QuenchSetup):
    return lambda k: quench_geometry(q, k).cos_theta


def tfim_critical_momentum(g_i: float, g_f: float) -> float | None:
    """Closed form ``arccos[(1 + g_i g_f) / (g_i + g_f)]``; None unless the argument is in (-1, 1)."""
    denom = g_i + g_f
    if denom == 0:
        return None
    arg = (1.0 + g_i * g_f) / denom
    if not -1.0 < arg < 1.0:
        return None
    return math.acos(arg)


def scan_critical_momenta(q: QuenchSetup) -> CriticalSearch:
    """Sign scan of ``cos_theta`` on a 1024-interval grid, then bisection of the first bracket.

    Tangential zeros (no sign change) are not detected.
    """
    edge = np.pi * 1e-9
    k = np.linspace(edge, np.pi - edge, SCAN_INTERVALS + 1)
    c = np.asarray(_cos_theta(q)(k))
    signs = np.sign(c)
    exact = np.flatnonzero(signs == 0)
    changes = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    count = len(changes) + len(exact)
    candidates = []
    if len(exact):
        candidates.append(float(k[exact[0]]))
    if len(changes):
        i = changes[0]
        f = _cos_theta(q)
        candidates.append(bisect(lambda x: float(f(x)), k[i], k[i + 1], xtol=K_TOL, rtol=4 * np.finfo(float).eps))
    return CriticalSearch(min(candidates) if candidates else None, count)


def critical_momentum(q: QuenchSetup) -> float | None:
    """Critical momentum of the quench, or None when no real ``k*`` exists in (0, pi)."""
    if q.is_tfim:
        return tfim_critical_momentum(q.initial.ising_field, q.final.ising_field)
    return scan_critical_momenta(q).k_star


def critical_times(q: QuenchSetup, n_max: int = 4) -> CriticalData:
    k_star = critical_momentum(q)
    if k_star is None:
        raise NoDQPT("quench has no real critical momentum")
    eps = float(quench_geometry(q, k_star).eps_f)
    t0 = math.pi / (2.0 * eps)
    return CriticalData(k_star, eps, tuple((2 * n + 1) * t0 for n in range(n_max + 1)))


def has_dqpt(q: QuenchSetup) -> bool:
    return critical_momentum(q) is not None


def _refine_flip(pred: Callable[[float], bool], a: float, b: float, tol: float) -> float:
    left = pred(a)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if pred(mid) == left:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def onset_scan(g_i: float, g_f_range: tuple[float, float], steps: int, tol: float = 1e-10) -> list[float]:
    """Final fields where DQPT existence switches for an Ising quench from ``g_i``.

    Existence is sampled at ``steps`` evenly spaced fields and each flip is
    refined by bisection to ``tol``.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    lo, hi = map(float, g_f_range)

    def exists(g_f):
        return tfim_critical_momentum(g_i, g_f) is not None

    grid = np.linspace(lo, hi, steps)
    flags = [exists(g) for g in grid]
    return [
        _refine_flip(exists, float(grid[j]), float(grid[j + 1]), tol)
        for j in range(steps - 1)
        if flags[j] != flags[j + 1]
    ]


def detect_cusps(t: Sequence[float], lam: Sequence[float], factor: float = 5.0, window: int = 5) -> list[float]:
    """Times where a sampled rate function has a cusp.

    A sample ``i`` is flagged when the jump between consecutive forward
    slopes exceeds ``factor`` times the median jump and ``lam[i]`` is the
    maximum of the ``window`` samples centred on it. Flags closer than
    ``window`` samples are merged, keeping the larger ``lam``.
    """
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if t.shape != lam.shape or t.ndim != 1:
        raise ValueError("t and lam must be 1-d arrays of equal length")
    if len(t) < 16:
        raise TooFewSamples(f"need at least 16 samples, got {len(t)}")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ValueError("t must be uniformly spaced")
    slope = np.diff(lam) / dt[0]
    jump = np.abs(np.diff(slope))  # jump[i - 1] sits at sample i
    threshold = factor * np.median(jump)
    half = window // 2
    flagged = []
    for i in range(1, len(lam) - 1):
        if jump[i - 1] > threshold and lam[i] == lam[max(0, i - half): i + half + 1].max():
            if flagged and i - flagged[-1] < window:
                if lam[i] > lam[flagged[-1]]:
                    flagged[-1] = i
                continue
            flagged.append(i)
    return [float(t[i]) for i in flagged]
