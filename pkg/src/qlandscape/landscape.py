"""First- and second-order landscape kernels on the control grid.

Sign convention: the control enters as H = H0 - mu eps, so the coupling
operator per unit field is -mu. The gradient kernel therefore reads
g(t) = -i Tr{[rho0, O_T] (-mu(t))} = i Tr{[rho0, O_T] mu(t)}. Everything
quadratic in the coupling (Hessian, smeared dipole forms, rank probes) is
insensitive to that sign.

Time integrals use the rectangle rule on interval midpoints, matching the
sampling in :mod:`qlandscape.propagator`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotAKCPError, ValidationError
from .matrix_core import commutator, dag, frobenius, hermitian_to_real, real_coordinate_labels
from .propagator import IMAG_TOL, PropagationResult, objective, propagate, step_spectra
from .system import ControlField, ControlTask

KCP_TOL = 1e-8
FD_GRAD_STEP = 1e-5
FD_HESS_STEP = 1e-3
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class GradientVector:
    """Kernel samples g(t_m*) (per unit time) and the grid spacing."""

    samples: np.ndarray
    dt: float

    def discrete(self) -> np.ndarray:
        """dt * g: first-order approximation of dJ/d eps_m."""
        return self.dt * self.samples

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0


@dataclass(frozen=True)
class HessianMatrix:
    """Kernel samples H(t_m*, t_k*) and the grid spacing."""

    entries: np.ndarray
    dt: float

    @property
    def weighted(self) -> np.ndarray:
        """dt^2 * H, the matrix of the discrete quadratic form."""
        return self.entries * self.dt**2

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.weighted)


@dataclass(frozen=True)
class SpectralForm:
    h: float
    h_plus: float
    h_minus: float


def _prop(task, field, prop):
    return propagate(task, field) if prop is None else prop


def kcp_commutator(task: ControlTask, prop: PropagationResult) -> np.ndarray:
    return commutator(task.rho0, prop.O_T)


def gradient_kernel(task: ControlTask, field: ControlField, prop: PropagationResult | None = None) -> GradientVector:
    prop = _prop(task, field, prop)
    z = kcp_commutator(task, prop)
    # Tr(Z V_m) for every m, with V = -mu(t)
    tr = -np.einsum("ab,mba->m", z, prop.heisenberg_dipoles)
    g = -1j * tr
    scale = max(1.0, frobenius(z) * frobenius(task.system.mu))
    if np.max(np.abs(g.imag), initial=0.0) > IMAG_TOL * scale:
        raise ValidationError(f"gradient kernel imaginary residual {np.max(np.abs(g.imag)):.3e}")
    return GradientVector(np.ascontiguousarray(g.real), prop.dt)


def _exp_derivative_weights(w: np.ndarray, dt: float) -> np.ndarray:
    """Divided differences of x -> exp(-i x dt) on each eigenvalue pair.

    Written with sinc so coincident eigenvalues need no special case.
    """
    a = w[..., :, None]
    b = w[..., None, :]
    return -1j * dt * np.exp(-0.5j * dt * (a + b)) * np.sinc(dt * (a - b) / (2 * np.pi))


def gradient_discrete(task: ControlTask, field: ControlField) -> np.ndarray:
    """Exact dJ/d eps_m of the piecewise-constant parametrization."""
    prop = propagate(task, field)
    w, q = step_spectra(task, field)
    qd = dag(q)
    steps = (q * np.exp(-1j * w * field.dt)[:, None, :]) @ qd
    # derivative of each step exponential along dH = -mu
    x = qd @ (-task.system.mu) @ q
    d_steps = q @ (_exp_derivative_weights(w, field.dt) * x) @ qd

    before = prop.boundary_unitaries[:-1]
    after = prop.boundary_unitaries[1:]
    rho_prev = before @ task.rho0 @ dag(before)
    obs_next = after @ prop.O_T @ dag(after)
    tr = np.einsum("mab,mbc,mcd,mda->m", d_steps, rho_prev, dag(steps), obs_next)
    return 2.0 * tr.real


def hessian_kernel(task: ControlTask, field: ControlField, prop: PropagationResult | None = None) -> HessianMatrix:
    """Sample H(t1, t2) = Tr{O_T [2 V1 rho0 V2 - T[V1 V2] rho0 - rho0 Ta[V1 V2]]}.

    T places the later time on the left, Ta the earlier one. The raw
    expression for (later, earlier) is the complex conjugate of the one for
    (earlier, later); the Hessian is its real part, filled from the lower
    triangle (row index later) and mirrored.
    """
    prop = _prop(task, field, prop)
    v = prop.heisenberg_dipoles
    o_t, rho = prop.O_T, task.rho0
    t1 = np.einsum("mab,kba->mk", o_t @ v @ rho, v)
    t2 = np.einsum("mab,kba->mk", rho @ o_t @ v, v)
    t3 = np.einsum("mab,kba->mk", v @ o_t @ rho, v)
    raw = (2.0 * t1 - t2 - t3).real
    lower = np.tril(raw)
    return HessianMatrix(lower + np.tril(raw, -1).T, prop.dt)


def quadratic_form(hessian: HessianMatrix, f) -> float:
    f = np.asarray(f, dtype=float)
    if f.shape != (hessian.entries.shape[0],):
        raise ValidationError(
            f"length mismatch: f has shape {f.shape}, Hessian is {hessian.entries.shape}"
        )
    return float(f @ hessian.entries @ f) * hessian.dt**2


def smeared_dipole(prop: PropagationResult, f) -> np.ndarray:
    """V_f = sum_m f_m V(t_m*) dt."""
    f = np.asarray(f, dtype=float)
    if f.shape != (prop.M,):
        raise ValidationError(f"length mismatch: f has shape {f.shape}, grid has M={prop.M}")
    return np.einsum("m,mab->ab", f, prop.heisenberg_dipoles) * prop.dt


def common_eigenbasis(rho: np.ndarray, obs: np.ndarray, cluster_tol: float = KCP_TOL) -> np.ndarray:
    """Orthonormal basis diagonalizing two (nearly) commuting Hermitian matrices.

    Diagonalizes ``rho`` first, then ``obs`` inside each eigenspace of ``rho``.
    """
    w, p = np.linalg.eigh(rho)
    cols = []
    start = 0
    for end in range(1, len(w) + 1):
        if end == len(w) or w[end] - w[end - 1] > cluster_tol:
            block = p[:, start:end]
            _, r = np.linalg.eigh(dag(block) @ obs @ block)
            cols.append(block @ r)
            start = end
    return np.hstack(cols)


def spectral_form(
    task: ControlTask,
    field: ControlField,
    f,
    prop: PropagationResult | None = None,
    kcp_tol: float = KCP_TOL,
) -> SpectralForm:
    """Hessian quadratic form evaluated in the common eigenbasis at a KCP.

    h(f) = Tr[(2 V_f rho0 V_f - V_f^2 rho0 - rho0 V_f^2) O_T]
         = 2 sum_{k,i} w_k (l_i - l_k) |<phi_k|V_f|phi_i>|^2,

    split into the non-negative parts over pairs with l_i > l_k (h_plus)
    and l_k > l_i (h_minus). The factor 2 makes h equal to the grid
    quadratic form of the Hessian kernel.
    """
    prop = _prop(task, field, prop)
    resid = frobenius(kcp_commutator(task, prop))
    if resid > kcp_tol:
        raise NotAKCPError(f"not a KCP: ||[rho0, O_T]||_F = {resid:.3e} exceeds {kcp_tol:.1e}")
    phi = common_eigenbasis(task.rho0, prop.O_T, kcp_tol)
    # populations are >= 0 in exact arithmetic; drop negative round-off
    omega = np.clip(np.real(np.einsum("ak,ab,bk->k", phi.conj(), task.rho0, phi)), 0.0, None)
    lam = np.real(np.einsum("ak,ab,bk->k", phi.conj(), prop.O_T, phi))
    vf = dag(phi) @ smeared_dipole(prop, f) @ phi
    weight = np.abs(vf) ** 2
    gap = lam[None, :] - lam[:, None]  # gap[k, i] = l_i - l_k
    terms = 2.0 * omega[:, None] * gap * weight
    h_plus = float(np.sum(np.where(gap > 0, terms, 0.0)))
    h_minus = float(-np.sum(np.where(gap < 0, terms, 0.0)))
    return SpectralForm(h=h_plus - h_minus, h_plus=h_plus, h_minus=h_minus)


# -- finite-difference oracles -------------------------------------------

def fd_gradient(task: ControlTask, field: ControlField, step: float = FD_GRAD_STEP) -> np.ndarray:
    if step <= 0:
        raise ValidationError("finite-difference step must be positive")
    base = np.array(field.values)
    out = np.empty(field.M)
    for m in range(field.M):
        up, dn = base.copy(), base.copy()
        up[m] += step
        dn[m] -= step
        out[m] = (objective(task, field.with_values(up)) - objective(task, field.with_values(dn))) / (2 * step)
    return out


def fd_hessian(task: ControlTask, field: ControlField, step: float = FD_HESS_STEP) -> np.ndarray:
    """Central second differences of J over every interval pair."""
    if step <= 0:
        raise ValidationError("finite-difference step must be positive")
    base = np.array(field.values)
    M = field.M

    def J(shift):
        return objective(task, field.with_values(base + shift))

    j0 = J(np.zeros(M))
    out = np.empty((M, M))
    eye = np.eye(M) * step
    for m in range(M):
        out[m, m] = (J(eye[m]) - 2 * j0 + J(-eye[m])) / step**2
        for k in range(m):
            val = (
                J(eye[m] + eye[k]) - J(eye[m] - eye[k]) - J(-eye[m] + eye[k]) + J(-eye[m] - eye[k])
            ) / (4 * step**2)
            out[m, k] = out[k, m] = val
    return out


def fd_directional_second(task: ControlTask, field: ControlField, f, step: float = FD_HESS_STEP) -> float:
    """d^2/ds^2 J(eps + s f) at s=0 by a central second difference."""
    f = np.asarray(f, dtype=float)
    base = np.array(field.values)
    jp = objective(task, field.with_values(base + step * f))
    j0 = objective(task, field)
    jm = objective(task, field.with_values(base - step * f))
    return (jp - 2 * j0 + jm) / step**2


# -- Jacobian rank probe --------------------------------------------------

@dataclass(frozen=True)
class JacobianProbe:
    rank: int
    full_rank: int
    singular_values: np.ndarray
    absent_coordinates: list


def jacobian_probe(task: ControlTask, field: ControlField, prop: PropagationResult | None = None) -> JacobianProbe:
    """Real-linear span of the sampled Heisenberg dipoles V(t_m*).

    A coordinate is reported absent when every sample has a vanishing
    component there (relative 1e-12).
    """
    prop = _prop(task, field, prop)
    x = hermitian_to_real(prop.heisenberg_dipoles)
    s = np.linalg.svd(x, compute_uv=False)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > RANK_RTOL * top)) if top > 0 else 0
    col = np.max(np.abs(x), axis=0)
    labels = real_coordinate_labels(task.n)
    absent = [labels[c] for c in range(x.shape[1]) if col[c] <= 1e-12 * max(top, 1e-300)]
    return JacobianProbe(rank, task.n**2, s, absent)


def jacobian_rank(task: ControlTask, field: ControlField) -> int:
    return jacobian_probe(task, field).rank
