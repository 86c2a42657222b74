"""
Two-band Bloch Hamiltonians and per-mode quench geometry.

Every translation-invariant free-fermion two-band model splits into
independent (k, -k) sectors with a 2x2 Bloch Hamiltonian

    H(k) = d0(k) * I + d(k) . sigma

The battery is charged by a sudden quench ``initial -> final``. All of the
single-mode physics is fixed by the two band energies ``eps = |d|`` and the
overlap of the unit Bloch vectors, which sets the charging weight
``A(k) = 1 - (dhat_i . dhat_f)^2``.

Functions here accept scalar momenta or numpy arrays of momenta; scalar in,
scalar out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .errors import GapClosing, InvalidCount

GAP_THRESHOLD = 1e-12


@dataclass(frozen=True)
class BlochVector:
    d1: float
    d2: float
    d3: float

    def __post_init__(self):
        if not all(np.isfinite((self.d1, self.d2, self.d3))):
            raise ValueError(f"non-finite Bloch vector {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.d1, self.d2, self.d3])

    def norm(self) -> float:
        return float(np.sqrt(self.d1**2 + self.d2**2 + self.d3**2))


class _IsingVector:
    """d(k) = (0, 2 sin k, 2(g - cos k)) of the transverse-field Ising chain."""

    def __init__(self, g: float):
        self.g = float(g)

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        return np.stack([np.zeros_like(k), 2 * np.sin(k), 2 * (self.g - np.cos(k))])

    def __repr__(self):
        return f"_IsingVector(g={self.g!r})"


def _zero_shift(k):
    return np.zeros_like(np.asarray(k, dtype=float))


@dataclass(frozen=True)
class TwoBandSpec:
    """Parameterized Bloch Hamiltonian.

    Attributes
    ----------
    d0 : callable
        Scalar shift ``d0(k)``. Kept for completeness; it never enters the
        stored energy because a uniform shift cancels in the difference.
    d : callable
        ``d(k)`` returning an array of shape ``(3,) + shape(k)``.
    params : mapping
        Named parameters the model was built from (read-only).
    ising_field : float or None
        Set only for the transverse-field Ising instance; enables closed-form
        critical-momentum formulas downstream.
    """

    d0: Callable
    d: Callable
    params: Mapping[str, float] = field(default_factory=dict)
    ising_field: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    def vector(self, k) -> np.ndarray:
        return np.asarray(self.d(k), dtype=float)

    def shift(self, k) -> np.ndarray:
        return np.asarray(self.d0(k), dtype=float)


def tfim_spec(g: float) -> TwoBandSpec:
    """Transverse-field Ising chain at field ``g`` (Ising coupling 1)."""
    g = float(g)
    if not np.isfinite(g):
        raise ValueError(f"field must be finite, got {g!r}")
    return TwoBandSpec(d0=_zero_shift, d=_IsingVector(g), params={"g": g}, ising_field=g)


@dataclass(frozen=True)
class QuenchSetup:
    """One charging protocol: ground state of ``initial`` evolved under ``final``."""

    initial: TwoBandSpec
    final: TwoBandSpec

    @classmethod
    def tfim(cls, g_i: float, g_f: float) -> "QuenchSetup":
        return cls(tfim_spec(g_i), tfim_spec(g_f))

    @property
    def is_tfim(self) -> bool:
        return self.initial.ising_field is not None and self.final.ising_field is not None


class ModeEvaluation(NamedTuple):
    d: BlochVector
    eps: float
    unit_d: BlochVector


def check_momentum(k) -> np.ndarray:
    """Return ``k`` as an array, raising ValueError outside the open interval (0, pi)."""
    k = np.asarray(k, dtype=float)
    if not np.all((k > 0.0) & (k < np.pi)):
        raise ValueError("momentum must lie in the open interval (0, pi)")
    return k


def bloch(spec: TwoBandSpec, k):
    """Vectorized ``(d, eps)`` with ``d`` of shape ``(3,) + shape(k)``.

    Raises GapClosing at the first momentum where ``eps`` drops below
    ``GAP_THRESHOLD``.
    """
    k = np.asarray(k, dtype=float)
    d = np.broadcast_to(spec.vector(k), (3,) + k.shape)
    eps = np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
    closed = ~(eps >= GAP_THRESHOLD)
    if np.any(closed):
        idx = np.argwhere(closed)[0]
        bad_k = float(k[tuple(idx)]) if k.ndim else float(k)
        bad_eps = float(eps[tuple(idx)]) if k.ndim else float(eps)
        raise GapClosing(bad_k, bad_eps)
    return d, eps


def evaluate_mode(spec: TwoBandSpec, k: float) -> ModeEvaluation:
    """Bloch vector, band energy and unit Bloch vector at a single momentum."""
    k = check_momentum(k)
    if k.ndim:
        raise ValueError("evaluate_mode takes a single momentum; use bloch() for arrays")
    d, eps = bloch(spec, k)
    eps = float(eps)
    return ModeEvaluation(BlochVector(*map(float, d)), eps, BlochVector(*(float(c) / eps for c in d)))


@dataclass(frozen=True)
class ModeGeometry:
    """Per-mode quench geometry; fields are floats or arrays shaped like ``k``."""

    k: np.ndarray | float
    eps_i: np.ndarray | float
    eps_f: np.ndarray | float
    cos_theta: np.ndarray | float
    weight_A: np.ndarray | float


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def quench_geometry(q: QuenchSetup, k) -> ModeGeometry:
    """Band energies, Bloch-vector overlap and charging weight at momentum ``k``."""
    k = check_momentum(k)
    d_i, eps_i = bloch(q.initial, k)
    d_f, eps_f = bloch(q.final, k)
    cos_theta = np.sum(d_i * d_f, axis=0) / (eps_i * eps_f)
    cos_theta = np.clip(cos_theta, -1.0, 1.0)
    # sin^2 from the cross product avoids the cancellation in 1 - cos^2 for
    # nearly parallel vectors (and is exactly 0 for identical ones)
    cross = np.cross(d_i, d_f, axis=0)
    weight = np.minimum(np.sum(cross * cross, axis=0) / (eps_i * eps_f) ** 2, 1.0)
    return ModeGeometry(_out(k), _out(eps_i), _out(eps_f), _out(cos_theta), _out(weight))


@dataclass(frozen=True)
class MomentumGrid:
    M: int
    points: np.ndarray

    def __len__(self):
        return self.M


def momentum_grid(M: int) -> MomentumGrid:
    """Midpoint grid ``k_n = pi (n + 1/2) / M`` on the half Brillouin zone."""
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise InvalidCount(f"mode count must be a positive integer, got {M!r}")
    M = int(M)
    points = np.pi * (np.arange(M) + 0.5) / M
    points.setflags(write=False)
    return MomentumGrid(M, points)
