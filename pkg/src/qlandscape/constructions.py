"""Instance families with known critical-point structure, plus a Lie-rank check."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .critical import dressed_basis
from .errors import ValidationError
from .matrix_core import check_hermitian, frobenius, hermitian_to_real, random_hermitian_rng
from .system import ControlTask, QuantumSystem


@dataclass(frozen=True)
class LambdaParams:
    """Three-level Lambda system; defaults are arbitrary but reproducible."""

    lambdas: tuple = (1.0, 2.0, 0.0)
    energies: tuple = (0.0, 1.0, 2.5)
    mu13: float = 1.0
    mu23: float = 1.0
    T: float = 5.0

    def __post_init__(self):
        l1, l2, l3 = self.lambdas
        if not (l2 > l1 > l3):
            raise ValidationError(f"Lambda targets need lambda2 > lambda1 > lambda3, got {self.lambdas}")
        if self.mu13 == 0 or self.mu23 == 0:
            raise ValidationError("Lambda couplings mu13 and mu23 must be nonzero")
        if len(self.energies) != 3:
            raise ValidationError("Lambda system needs three energies")


def lambda_system(params: LambdaParams = LambdaParams()) -> QuantumSystem:
    mu = np.zeros((3, 3), dtype=complex)
    mu[0, 2] = mu[2, 0] = params.mu13
    mu[1, 2] = mu[2, 1] = params.mu23
    return QuantumSystem(np.diag(np.asarray(params.energies, dtype=complex)), mu)


def build_lambda(params: LambdaParams = LambdaParams(), initial_level: int = 1) -> ControlTask:
    """Lambda task with rho0 = |initial_level><initial_level| (1-based) and O = diag(lambdas).

    The default ``initial_level=1`` is the trap instance; 2 and 3 give the
    global-maximum and global-minimum configurations.
    """
    if initial_level not in (1, 2, 3):
        raise ValidationError(f"initial_level must be 1, 2 or 3, got {initial_level}")
    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[initial_level - 1, initial_level - 1] = 1.0
    O = np.diag(np.asarray(params.lambdas, dtype=complex))
    return ControlTask(lambda_system(params), rho0, O, params.T, template="lambda")


def build_trap_instance(
    system: QuantumSystem,
    eps0: float,
    k: int,
    lambdas,
    T: float,
    order=None,
    mu_tol: float = 1e-12,
) -> ControlTask:
    """Task for which eps(t) = eps0 is a second-order trap.

    Dressed states of H0 - mu eps0 are indexed by ascending energy. ``order``
    (1-based, default identity) assigns the i-th largest target value to
    dressed state ``order[i]``; ``k`` is the 1-based rank of the initial
    state in that descending list. The coupling condition is verified, not
    assumed.
    """
    n = system.n
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (n,):
        raise ValidationError(f"need {n} target values, got {lambdas.shape}")
    if np.any(np.diff(lambdas) >= 0):
        raise ValidationError(f"target values must be strictly descending, got {lambdas.tolist()}")
    if not 1 < k < n:
        raise ValidationError(f"k must satisfy 1 < k < n={n}, got k={k}")
    order = np.arange(n) if order is None else np.asarray(order, dtype=int) - 1
    if sorted(order.tolist()) != list(range(n)):
        raise ValidationError(f"order must be a permutation of 1..{n}")

    probe = ControlTask(system, np.eye(n) / n, np.zeros((n, n)), T)
    _, q = dressed_basis(probe, eps0)
    states = q[:, order]
    mu_d = states.conj().T @ system.mu @ states
    scale = max(1.0, frobenius(system.mu))
    bad = [(i + 1, k) for i in range(k - 1) if abs(mu_d[i, k - 1]) > mu_tol * scale]
    if bad:
        raise ValidationError(
            "dressed coupling condition violated: <i|mu|k> != 0 for (i, k) in " + ", ".join(map(str, bad))
        )
    top = states[:, k - 1]
    rho0 = np.outer(top, top.conj())
    O = (states * lambdas) @ states.conj().T
    return ControlTask(system, rho0, O, T)


@dataclass(frozen=True)
class DcpInstanceParams:
    """Two-level superposition instance; levels are 1-based dressed indices."""

    system: QuantumSystem
    i: int = 1
    j: int = 2
    psi_phase: float = 0.0
    phi_phase: float = math.pi / 2
    T: float = 1.0
    Q: np.ndarray | None = None
    eps0: float = 0.0

    @property
    def alpha(self) -> float:
        return self.phi_phase - self.psi_phase


@dataclass(frozen=True)
class DcpPredictions:
    J_at_eps0: float
    z_element: complex
    alpha: float

    def to_dict(self) -> dict:
        return {
            "J_at_eps0": self.J_at_eps0,
            "z_element": [self.z_element.real, self.z_element.imag],
            "abs_z_element": abs(self.z_element),
            "alpha": self.alpha,
        }


def build_dcp_not_kcp(params: DcpInstanceParams, tol: float = 1e-12):
    """Task whose constant control eps0 is dynamically but not kinematically critical.

    rho0 = |psi><psi| with psi = (|i~> + e^{i psi_phase}|j~>)/sqrt(2) and
    O = e^{-i T H~} (|phi><phi| + Q) e^{i T H~}, with H~ = H0 - mu eps0 and
    |k~> its eigenvectors. Requires <i~|mu|i~> = <j~|mu|j~>.
    """
    system = params.system
    n = system.n
    i, j = params.i - 1, params.j - 1
    if not (0 <= i < n and 0 <= j < n and i != j):
        raise ValidationError(f"levels i={params.i}, j={params.j} must be distinct and within 1..{n}")
    alpha = params.alpha
    if abs(math.sin(alpha)) <= 1e-10:
        raise ValidationError(f"alpha = phi - psi must avoid 0 and pi (mod 2 pi), got {alpha!r}")

    energies, q = np.linalg.eigh(system.hamiltonian(params.eps0))
    mu_d = q.conj().T @ system.mu @ q
    if abs(mu_d[i, i] - mu_d[j, j]) > tol * max(1.0, frobenius(system.mu)):
        raise ValidationError(
            f"diagonal dipole mismatch: <i|mu|i> - <j|mu|j> = {abs(mu_d[i, i] - mu_d[j, j]):.3e}"
        )
    ket_i, ket_j = q[:, i], q[:, j]
    psi = (ket_i + np.exp(1j * params.psi_phase) * ket_j) / math.sqrt(2)
    phi = (ket_i + np.exp(1j * params.phi_phase) * ket_j) / math.sqrt(2)

    Q = np.zeros((n, n), dtype=complex) if params.Q is None else check_hermitian(params.Q, "Q")
    if Q.shape != (n, n):
        raise ValidationError(f"Q must be {n}x{n}, got {Q.shape}")
    if np.linalg.norm(Q @ psi) > tol * max(1.0, frobenius(Q)):
        raise ValidationError(f"Q must annihilate |psi>: ||Q psi|| = {np.linalg.norm(Q @ psi):.3e}")

    evolve = (q * np.exp(-1j * energies * params.T)) @ q.conj().T
    target = np.outer(phi, phi.conj()) + Q
    O = evolve @ target @ evolve.conj().T
    rho0 = np.outer(psi, psi.conj())
    task = ControlTask(system, rho0, O, params.T, template="dcp_not_kcp")
    predictions = DcpPredictions(
        J_at_eps0=(1 + math.cos(alpha)) / 2,
        z_element=(1 + np.exp(1j * alpha)) / 2 * (1 - math.cos(alpha)) / 2,
        alpha=alpha,
    )
    return task, predictions


def two_level_system() -> QuantumSystem:
    """H0 = diag(0, 1), mu = sigma_x."""
    return QuantumSystem(np.diag([0.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]]))


def random_task(n: int, seed: int, T: float = 1.0) -> ControlTask:
    """Random H0, mu, O (Hermitian ensemble) and a full-rank mixed rho0."""
    rng = np.random.default_rng(seed)
    H0 = random_hermitian_rng(n, rng)
    mu = random_hermitian_rng(n, rng)
    O = random_hermitian_rng(n, rng)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    return ControlTask(QuantumSystem(H0, mu), rho / np.trace(rho), O, T)


# -- controllability ------------------------------------------------------

@dataclass(frozen=True)
class LieRankResult:
    dimension: int
    n: int
    controllable: bool
    rounds: int


def lie_algebra_closure(system: QuantumSystem, rtol: float = 1e-10) -> LieRankResult:
    """Dimension of the real Lie algebra generated by i H0 and i mu.

    Elements are stored as Hermitian matrices A (standing for iA); the
    bracket [iA, iB] = i (-i [A, B]) keeps that representation Hermitian.
    New elements are kept when their residual after projecting onto the
    current basis exceeds ``rtol`` relative to their own norm.
    """
    n = system.n
    basis: list[np.ndarray] = []
    coords: list[np.ndarray] = []

    def add(a: np.ndarray) -> bool:
        v = hermitian_to_real(a)
        norm = np.linalg.norm(v)
        if norm == 0:
            return False
        r = v.copy()
        for _ in range(2):
            for c in coords:
                r -= (c @ r) * c
        if np.linalg.norm(r) <= rtol * norm:
            return False
        coords.append(r / np.linalg.norm(r))
        basis.append(a / norm)
        return True

    for gen in (system.H0, system.mu):
        add(gen)
    frontier = list(range(len(basis)))
    rounds = 0
    while frontier and len(basis) < n * n and rounds < n**4:
        rounds += 1
        new = []
        for a_idx in frontier:
            for b_idx in range(len(basis)):
                if b_idx == a_idx:
                    continue
                a, b = basis[a_idx], basis[b_idx]
                if add(-1j * (a @ b - b @ a)):
                    new.append(len(basis) - 1)
                if len(basis) == n * n:
                    break
            if len(basis) == n * n:
                break
        frontier = new
    dim = len(basis)
    return LieRankResult(dim, n, dim in (n * n, n * n - 1), rounds)


def lie_algebra_rank(system: QuantumSystem) -> int:
    return lie_algebra_closure(system).dimension
