"""Controlled system, control-field grid and task files.

Units: hbar = 1 and every quantity in a task file is dimensionless.
H0 is in energy units, the field amplitude times mu is an energy, and
time is measured in inverse energy.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .matrix_core import check_hermitian

TRACE_TOL = 1e-10
PSD_TOL = -1e-10
TEMPLATES = ("lambda", "dcp_not_kcp", "custom")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuantumSystem:
    """Free Hamiltonian ``H0`` and dipole ``mu``; H(t) = H0 - mu * eps(t)."""

    H0: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        h0 = check_hermitian(self.H0, "H0")
        mu = check_hermitian(self.mu, "mu")
        if h0.shape != mu.shape:
            raise ValidationError(f"dimension mismatch: H0 is {h0.shape}, mu is {mu.shape}")
        object.__setattr__(self, "H0", _frozen(h0))
        object.__setattr__(self, "mu", _frozen(mu))

    @property
    def n(self) -> int:
        return self.H0.shape[0]

    def hamiltonian(self, eps: float) -> np.ndarray:
        return self.H0 - self.mu * eps


@dataclass(frozen=True)
class ControlField:
    """Piecewise-constant amplitudes on a uniform grid of ``M`` intervals over [0, T]."""

    T: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T > 0):
            raise ValidationError(f"field horizon T must be finite and positive, got {self.T!r}")
        if vals.size < 1:
            raise ValidationError("field needs at least one interval")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ValidationError(f"non-finite amplitude at interval {bad}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def dt(self) -> float:
        return self.T / self.M

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.dt

    def with_values(self, values) -> "ControlField":
        return ControlField(self.T, values)

    @classmethod
    def zeros(cls, T: float, M: int) -> "ControlField":
        return cls(T, np.zeros(M))

    @classmethod
    def constant(cls, T: float, M: int, value: float) -> "ControlField":
        return cls(T, np.full(M, float(value)))

    @classmethod
    def sample(cls, T: float, M: int, envelope) -> "ControlField":
        """Sample a continuous envelope at interval midpoints."""
        t = (np.arange(M) + 0.5) * (T / M)
        return cls(T, np.asarray([envelope(x) for x in t], dtype=float))

    @classmethod
    def random_uniform(cls, T: float, M: int, amplitude: float, seed: int) -> "ControlField":
        rng = np.random.default_rng(seed)
        return cls(T, rng.uniform(-amplitude, amplitude, M))


@dataclass(frozen=True)
class ControlTask:
    """System plus initial density matrix, target observable and horizon."""

    system: QuantumSystem
    rho0: np.ndarray
    O: np.ndarray
    T: float
    template: str = "custom"

    def __post_init__(self):
        n = self.system.n
        rho = check_hermitian(self.rho0, "rho0")
        obs = check_hermitian(self.O, "O")
        for name, a in (("rho0", rho), ("O", obs)):
            if a.shape != (n, n):
                raise ValidationError(f"dimension mismatch: {name} is {a.shape}, system has n={n}")
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {tr.real:.12g}, expected 1")
        wmin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if wmin < PSD_TOL:
            raise ValidationError(
                f"density matrix not positive semi-definite: min eigenvalue {wmin:.3e}"
            )
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValidationError(f"horizon T must be finite and positive, got {self.T!r}")
        if self.template not in TEMPLATES:
            raise ValidationError(f"unknown template {self.template!r}; expected one of {TEMPLATES}")
        object.__setattr__(self, "rho0", _frozen(rho))
        object.__setattr__(self, "O", _frozen(obs))
        object.__setattr__(self, "T", float(self.T))
        _check_template(self)

    @property
    def n(self) -> int:
        return self.system.n

    def replace(self, **changes) -> "ControlTask":
        return replace(self, **changes)


def _check_template(task: ControlTask) -> None:
    if task.template == "lambda":
        h0, mu = task.system.H0, task.system.mu
        if task.n != 3:
            raise ValidationError(f"template 'lambda' requires n=3, got n={task.n}")
        if np.max(np.abs(h0 - np.diag(np.diag(h0)))) > 1e-12:
            raise ValidationError("template 'lambda' requires diagonal H0")
        if abs(mu[0, 1]) > 1e-12:
            raise ValidationError(
                f"template 'lambda' inconsistent: mu12 must vanish, got {abs(mu[0, 1]):.3e}"
            )
        if abs(mu[0, 2]) == 0 or abs(mu[1, 2]) == 0:
            raise ValidationError("template 'lambda' inconsistent: mu13 and mu23 must be nonzero")
    elif task.template == "dcp_not_kcp":
        w = np.linalg.eigvalsh(task.rho0)
        if abs(w[-1] - 1.0) > 1e-10:
            raise ValidationError("template 'dcp_not_kcp' requires a pure initial state")


@dataclass(frozen=True)
class KinematicBounds:
    Jmin: float
    Jmax: float


def kinematic_bounds(task: ControlTask) -> KinematicBounds:
    """Extremes of Tr[U rho0 U^dagger O] over all unitaries.

    Pairs the descending populations of rho0 with the descending (max) or
    ascending (min) spectrum of O.
    """
    omega = np.sort(np.linalg.eigvalsh(task.rho0))[::-1]
    lam = np.sort(np.linalg.eigvalsh(task.O))
    return KinematicBounds(Jmin=float(omega @ lam), Jmax=float(omega @ lam[::-1]))


# -- file formats ---------------------------------------------------------

def encode_matrix(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a, dtype=complex)]


def decode_matrix(data, name: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: cannot parse matrix ({exc})") from None
    if arr.ndim == 2:
        return arr.astype(complex)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValidationError(f"{name}: expected n x n array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def task_to_dict(task: ControlTask) -> dict:
    return {
        "n": task.n,
        "H0": encode_matrix(task.system.H0),
        "mu": encode_matrix(task.system.mu),
        "rho0": encode_matrix(task.rho0),
        "O": encode_matrix(task.O),
        "T": task.T,
        "template": task.template,
    }


def task_from_dict(data: dict) -> ControlTask:
    if not isinstance(data, dict):
        raise ValidationError("task file must hold a JSON object")
    missing = [k for k in ("n", "H0", "mu", "rho0", "O", "T") if k not in data]
    if missing:
        raise ValidationError(f"task file missing keys: {', '.join(missing)}")
    n = int(data["n"])
    mats = {k: decode_matrix(data[k], k) for k in ("H0", "mu", "rho0", "O")}
    for k, a in mats.items():
        if a.shape != (n, n):
            raise ValidationError(f"dimension mismatch: {k} is {a.shape}, declared n={n}")
    system = QuantumSystem(mats["H0"], mats["mu"])
    return ControlTask(
        system, mats["rho0"], mats["O"], float(data["T"]), template=data.get("template") or "custom"
    )


def load_task(path) -> ControlTask:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: parse error: {exc}") from None
    return task_from_dict(data)


def save_task(task: ControlTask, path) -> None:
    write_text_atomic(path, json.dumps(task_to_dict(task), indent=2, sort_keys=True) + "\n")


def field_to_dict(f: ControlField) -> dict:
    return {"T": f.T, "M": f.M, "values": [float(v) for v in f.values]}


def field_from_dict(data: dict) -> ControlField:
    try:
        T, M, values = float(data["T"]), int(data["M"]), data["values"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"field file: bad or missing entry ({exc})") from None
    if len(values) != M:
        raise ValidationError(f"field file declares M={M} but holds {len(values)} values")
    return ControlField(T, values)


def load_field(path) -> ControlField:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: parse error: {exc}") from None
    return field_from_dict(data)


def save_field(f: ControlField, path) -> None:
    write_text_atomic(path, json.dumps(field_to_dict(f), indent=2, sort_keys=True) + "\n")


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)
