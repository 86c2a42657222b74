"""
Exact single-mode quench dynamics.

Each momentum sector is a two-level system prepared in the ground state of
``d_i(k) . sigma`` and rotated by ``d_f(k) . sigma``. With
``A = 1 - cos_theta^2`` and ``s = sin^2(eps_f t)`` the mode quantities are

    excitation probability   A s
    stored energy            2 eps_i A s
    power                    2 eps_i eps_f A sin(2 eps_f t)
    energy variance          4 eps_i^2 A s (1 - A s)
    Loschmidt amplitude      cos(eps_f t) + i sin(eps_f t) cos_theta

``propagator_ode_oracle`` integrates the Schroedinger equation for the 2x2
propagator numerically and is kept independent of the closed forms so the
two can be cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepTooLarge
from .model_core import QuenchSetup, TwoBandSpec, bloch, check_momentum, quench_geometry

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

SNR_FLOOR = 1e-12


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if not np.all(t >= 0):
        raise ValueError("time must be non-negative")
    return t


def _out(x):
    return x.item() if np.ndim(x) == 0 else x


def bloch_matrix(spec: TwoBandSpec, k: float) -> np.ndarray:
    """``d(k) . sigma`` as a 2x2 matrix (the scalar shift is dropped)."""
    d, _ = bloch(spec, k)
    return np.einsum("a,aij->ij", np.asarray(d, dtype=float), PAULI)


def ground_state(spec: TwoBandSpec, k: float) -> np.ndarray:
    """Eigenvector of ``d(k) . sigma`` with eigenvalue ``-eps``.

    The phase is fixed so that the first nonzero component is real and positive.
    """
    k = check_momentum(k)
    _, vecs = np.linalg.eigh(bloch_matrix(spec, float(k)))
    psi = vecs[:, 0]
    lead = psi[0] if abs(psi[0]) > 1e-14 else psi[1]
    return psi * (abs(lead) / lead)


def propagator_closed(q: QuenchSetup, k, t) -> np.ndarray:
    """``cos(eps_f t) I - i sin(eps_f t) dhat_f . sigma``, shape ``broadcast(k, t) + (2, 2)``."""
    k = check_momentum(k)
    t = _check_time(t)
    d_f, eps_f = bloch(q.final, k)
    phase = eps_f * t
    unit = (d_f / eps_f).reshape((3,) + (1,) * (phase.ndim - k.ndim) + k.shape)
    unit = np.broadcast_to(unit, (3,) + phase.shape)
    n_sigma = np.einsum("a...,aij->...ij", unit, PAULI)
    c = np.cos(phase)[..., None, None]
    s = np.sin(phase)[..., None, None]
    return c * np.eye(2) - 1j * s * n_sigma


def propagator_ode_oracle(q: QuenchSetup, k: float, t: float, dt: float) -> np.ndarray:
    """Classical RK4 solution of ``i dU/dt = H_f(k) U`` with ``U(0) = I``.

    The step is shortened uniformly so the last step lands on ``t``. No
    re-unitarization is applied.
    """
    k = float(check_momentum(k))
    t = float(_check_time(t))
    h_f = bloch_matrix(q.final, k)
    eps_f = float(bloch(q.final, k)[1])
    if not dt > 0 or dt > 0.01 / eps_f:
        raise StepTooLarge(f"dt={dt!r} exceeds 0.01/eps_f = {0.01 / eps_f!r}")
    u = np.eye(2, dtype=complex)
    steps = int(np.ceil(t / dt)) if t > 0 else 0
    if steps == 0:
        return u
    h = t / steps
    gen = -1j * h_f
    # The generator is time independent, so one RK4 step is the same linear
    # map for every step: build it once by running the stages on I.
    k1 = gen
    k2 = gen @ (u + 0.5 * h * k1)
    k3 = gen @ (u + 0.5 * h * k2)
    k4 = gen @ (u + h * k3)
    step = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    for _ in range(steps):
        u = step @ u
    return u


def loschmidt_amplitude(q: QuenchSetup, k, t):
    """Return overlap ``<psi_0 | U_f(t) | psi_0>`` in the ``k`` sector."""
    t = _check_time(t)
    geo = quench_geometry(q, k)
    phase = geo.eps_f * t
    return _out(np.cos(phase) + 1j * np.sin(phase) * geo.cos_theta)


@dataclass(frozen=True)
class ModeObservables:
    k: np.ndarray | float
    t: np.ndarray | float
    delta_E: np.ndarray | float
    power: np.ndarray | float
    loschmidt: np.ndarray | complex
    surv_prob: np.ndarray | float
    exc_prob: np.ndarray | float
    variance: np.ndarray | float
    snr: np.ndarray | float


def mode_observables(q: QuenchSetup, k, t) -> ModeObservables:
    """All single-mode charging observables at ``(k, t)``; ``k`` and ``t`` broadcast."""
    t = _check_time(t)
    geo = quench_geometry(q, k)
    eps_i, eps_f, cos_theta, weight = geo.eps_i, geo.eps_f, geo.cos_theta, geo.weight_A
    phase = eps_f * t
    sin_phase = np.sin(phase)
    amp = np.cos(phase) + 1j * sin_phase * cos_theta
    exc = weight * sin_phase**2
    delta_e = 2 * eps_i * exc
    power = 2 * eps_i * eps_f * weight * np.sin(2 * phase)
    variance = 4 * eps_i**2 * exc * (1 - exc)
    snr = delta_e / np.maximum(np.sqrt(variance), SNR_FLOOR)
    k_b, t_b = np.broadcast_arrays(np.asarray(geo.k, dtype=float), t)
    return ModeObservables(
        k=_out(k_b),
        t=_out(t_b),
        delta_E=_out(delta_e),
        power=_out(power),
        loschmidt=_out(amp),
        surv_prob=_out(np.abs(amp) ** 2),
        exc_prob=_out(exc),
        variance=_out(variance),
        snr=_out(snr),
    )
