"""Piecewise-constant propagation of dU/dt = -i (H0 - mu eps(t)) U."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .matrix_core import dag
from .system import ControlField, ControlTask

IMAG_TOL = 1e-11


@dataclass(frozen=True)
class PropagationResult:
    """Unitaries on the grid plus the Heisenberg-picture operators derived from them.

    ``heisenberg_dipoles[m]`` is U^dagger(t_m*) mu U(t_m*) at the midpoint of
    interval m (0-based). ``O_T`` is U^dagger(T) O U(T).
    """

    boundary_unitaries: np.ndarray
    midpoint_unitaries: np.ndarray
    heisenberg_dipoles: np.ndarray
    O_T: np.ndarray
    dt: float

    @property
    def U_final(self) -> np.ndarray:
        return self.boundary_unitaries[-1]

    @property
    def M(self) -> int:
        return self.midpoint_unitaries.shape[0]


def _check_pair(task: ControlTask, field: ControlField) -> None:
    if abs(field.T - task.T) > 1e-12 * max(1.0, task.T):
        raise ValidationError(f"horizon mismatch: task T={task.T!r}, field T={field.T!r}")


def step_spectra(task: ControlTask, field: ControlField):
    """Eigendecompose every interval generator H0 - mu eps_m at once."""
    hs = task.system.H0[None, :, :] - field.values[:, None, None] * task.system.mu[None, :, :]
    return np.linalg.eigh(hs)


def step_unitaries(task: ControlTask, field: ControlField) -> np.ndarray:
    w, q = step_spectra(task, field)
    return (q * np.exp(-1j * w * field.dt)[:, None, :]) @ dag(q)


def propagate(task: ControlTask, field: ControlField, initial: np.ndarray | None = None) -> PropagationResult:
    _check_pair(task, field)
    n, M, dt = task.n, field.M, field.dt
    w, q = step_spectra(task, field)
    qd = dag(q)
    full = (q * np.exp(-1j * w * dt)[:, None, :]) @ qd
    half = (q * np.exp(-0.5j * w * dt)[:, None, :]) @ qd

    bounds = np.empty((M + 1, n, n), dtype=complex)
    bounds[0] = np.eye(n) if initial is None else initial
    for m in range(M):
        bounds[m + 1] = full[m] @ bounds[m]
    mids = half @ bounds[:-1]

    mu = task.system.mu
    dipoles = dag(mids) @ mu @ mids
    u = bounds[-1]
    o_t = u.conj().T @ task.O @ u
    return PropagationResult(bounds, mids, dipoles, o_t, dt)


def final_unitary(task: ControlTask, field: ControlField) -> np.ndarray:
    _check_pair(task, field)
    u = np.eye(task.n, dtype=complex)
    for step in step_unitaries(task, field):
        u = step @ u
    return u


def objective_from_unitary(task: ControlTask, u: np.ndarray) -> float:
    val = np.trace(u @ task.rho0 @ u.conj().T @ task.O)
    scale = max(1.0, float(np.linalg.norm(task.O)))
    if abs(val.imag) > IMAG_TOL * scale:
        raise NumericalError(f"objective has imaginary residual {val.imag:.3e}")
    return float(val.real)


def objective(task: ControlTask, field: ControlField) -> float:
    """J = Re Tr[U(T) rho0 U(T)^dagger O]."""
    return objective_from_unitary(task, final_unitary(task, field))
