"""Critical-point tests, Hessian-based classification and trap certificates."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import CertificateRefused
from .landscape import (
    KCP_TOL,
    gradient_kernel,
    hessian_kernel,
    kcp_commutator,
    spectral_form,
)
from .matrix_core import frobenius
from .propagator import PropagationResult, objective_from_unitary, propagate
from .system import ControlField, ControlTask, kinematic_bounds

LABELS = (
    "NOT_CRITICAL",
    "DCP",
    "KCP",
    "DCP_NOT_KCP",
    "NEG_SEMIDEFINITE",
    "POS_SEMIDEFINITE",
    "INDEFINITE",
    "SECOND_ORDER_TRAP_CANDIDATE",
    "GLOBAL_MAX_CANDIDATE",
    "GLOBAL_MIN_CANDIDATE",
)


@dataclass(frozen=True)
class Tolerances:
    grad: float = 1e-10
    kcp: float = KCP_TOL
    hess: float = 1e-9
    J_rel: float = 1e-6


@dataclass
class CriticalReport:
    grad_norm: float
    kcp_residual: float
    hessian_eigs: np.ndarray
    J: float
    Jmin: float
    Jmax: float
    labels: set
    M: int
    dt: float

    def to_dict(self) -> dict:
        return {
            "grad_norm": self.grad_norm,
            "kcp_residual": self.kcp_residual,
            "hessian_eigs": [float(x) for x in self.hessian_eigs],
            "J": self.J,
            "Jmin": self.Jmin,
            "Jmax": self.Jmax,
            "labels": [lab for lab in LABELS if lab in self.labels],
            "M": self.M,
            "dt": self.dt,
        }


def kcp_residual(task: ControlTask, field: ControlField, prop: PropagationResult | None = None) -> float:
    """||[rho0, O_T]||_F."""
    prop = propagate(task, field) if prop is None else prop
    return frobenius(kcp_commutator(task, prop))


def dcp_residual(task: ControlTask, field: ControlField, prop: PropagationResult | None = None) -> float:
    """Sup-norm over the grid of |Tr{[rho0, O_T] V(t_m*)}|."""
    return gradient_kernel(task, field, prop).sup_norm


def classify(task: ControlTask, field: ControlField, tol: Tolerances = Tolerances()) -> CriticalReport:
    prop = propagate(task, field)
    g = dcp_residual(task, field, prop)
    c = kcp_residual(task, field, prop)
    hess = hessian_kernel(task, field, prop).weighted
    eigs = np.linalg.eigvalsh(hess)
    J = objective_from_unitary(task, prop.U_final)
    b = kinematic_bounds(task)
    tol_J = tol.J_rel * (b.Jmax - b.Jmin)
    slack = tol.hess * max(1.0, frobenius(hess))

    labels = set()
    is_dcp = g <= tol.grad
    labels.add("DCP" if is_dcp else "NOT_CRITICAL")
    if c <= tol.kcp:
        labels.add("KCP")
    elif is_dcp:
        labels.add("DCP_NOT_KCP")
    nsd = eigs[-1] <= slack
    psd = eigs[0] >= -slack
    if nsd:
        labels.add("NEG_SEMIDEFINITE")
    if psd:
        labels.add("POS_SEMIDEFINITE")
    if not (nsd or psd):
        labels.add("INDEFINITE")
    if is_dcp and nsd:
        labels.add("SECOND_ORDER_TRAP_CANDIDATE" if J < b.Jmax - tol_J else "GLOBAL_MAX_CANDIDATE")
    if is_dcp and psd and J <= b.Jmin + tol_J:
        labels.add("GLOBAL_MIN_CANDIDATE")
    return CriticalReport(g, c, eigs, J, b.Jmin, b.Jmax, labels, field.M, field.dt)


# -- analytic certificate for constant controls ---------------------------

@dataclass
class TrapCertificate:
    holds: bool
    dressed_energies: list
    k: int | None
    rho_eigenstate_ok: bool
    lambda_ordering_ok: bool
    mu_zero_block_ok: bool
    k_interior_ok: bool
    details: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "dressed_energies": [float(x) for x in self.dressed_energies],
            "k": self.k,
            "rho_eigenstate_ok": self.rho_eigenstate_ok,
            "lambda_ordering_ok": self.lambda_ordering_ok,
            "mu_zero_block_ok": self.mu_zero_block_ok,
            "k_interior_ok": self.k_interior_ok,
            "details": self.details,
        }


def dressed_basis(task: ControlTask, eps0: float, gap_tol: float = 1e-10):
    """Eigenpairs of H0 - mu eps0, refusing degenerate spectra."""
    w, q = np.linalg.eigh(task.system.hamiltonian(eps0))
    gaps = np.diff(w)
    if gaps.size and gaps.min() <= gap_tol:
        raise CertificateRefused(
            "DEGENERATE_DRESSED_SPECTRUM", f"minimum dressed level gap {gaps.min():.3e}"
        )
    return w, q


def trap_certificate(
    task: ControlTask,
    eps0: float,
    overlap_tol: float = 1e-10,
    offdiag_tol: float = 1e-10,
    gap_tol: float = 1e-10,
    mu_tol: float = 1e-12,
) -> TrapCertificate:
    """Check the sufficient conditions for eps(t) = eps0 to be a second-order trap.

    In the dressed basis of H0 - mu eps0, relabelled so that the target
    eigenvalues descend: rho0 must be the projector on dressed state k,
    O must be diagonal with distinct eigenvalues, mu must not couple k to any
    state above it, and 1 < k < n. Indices in the result are 1-based.
    """
    energies, q = dressed_basis(task, eps0, gap_tol)
    n = task.n
    o_d = q.conj().T @ task.O @ q
    rho_d = q.conj().T @ task.rho0 @ q
    mu_d = q.conj().T @ task.system.mu @ q

    lam = np.real(np.diag(o_d))
    offdiag = float(np.max(np.abs(o_d - np.diag(np.diag(o_d)))))
    order = np.argsort(-lam, kind="stable")
    lam_sorted = lam[order]
    min_gap = float(np.min(-np.diff(lam_sorted))) if n > 1 else np.inf
    if min_gap <= gap_tol:
        raise CertificateRefused("LAMBDA_TIE", f"target eigenvalues tie within {min_gap:.3e}")
    lambda_ok = offdiag <= offdiag_tol * max(1.0, frobenius(task.O))

    pops = np.real(np.diag(rho_d))[order]
    k0 = int(np.argmax(pops))
    overlap = float(pops[k0])
    rho_ok = overlap >= 1 - overlap_tol

    mu_sorted = mu_d[np.ix_(order, order)]
    couplings = np.abs(mu_sorted[:k0, k0])
    mu_scale = max(1.0, frobenius(task.system.mu))
    offending = [(int(i) + 1, k0 + 1) for i in np.flatnonzero(couplings > mu_tol * mu_scale)]
    mu_ok = rho_ok and not offending
    interior = rho_ok and 0 < k0 < n - 1

    details = {
        "eps0": float(eps0),
        "rho_overlap": overlap,
        "O_offdiag_residual": offdiag,
        "lambda_descending": [float(x) for x in lam_sorted],
        "lambda_min_gap": min_gap,
        "dressed_order": [int(i) + 1 for i in order],
        "max_upper_coupling": float(couplings.max()) if couplings.size else 0.0,
        "offending_pairs": offending,
    }
    return TrapCertificate(
        holds=bool(rho_ok and lambda_ok and mu_ok and interior),
        dressed_energies=list(energies),
        k=k0 + 1 if rho_ok else None,
        rho_eigenstate_ok=bool(rho_ok),
        lambda_ordering_ok=bool(lambda_ok),
        mu_zero_block_ok=bool(mu_ok),
        k_interior_ok=bool(interior),
        details=details,
    )


# -- numerical second-order trap check ------------------------------------

@dataclass
class TrapVerdict:
    checks: dict
    dcp_residual: float
    kcp_residual: float
    max_h: float
    eig_extreme: float
    hessian_norm: float
    mode: str
    probes: int

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": dict(self.checks),
            "mode": self.mode,
            "probes": self.probes,
            "dcp_residual": self.dcp_residual,
            "kcp_residual": self.kcp_residual,
            "max_probe_value": self.max_h,
            "hessian_extreme_eigenvalue": self.eig_extreme,
            "hessian_norm": self.hessian_norm,
        }


def probe_directions(M: int, probes: int, seed: int):
    """Standard-normal directions, one independent generator per probe."""
    for p in range(probes):
        yield np.random.default_rng([seed, p]).standard_normal(M)


def second_order_trap_numeric(
    task: ControlTask,
    field: ControlField,
    probes: int = 100,
    seed: int = 0,
    tol: Tolerances = Tolerances(),
    h_tol: float = 1e-10,
    mode: str = "max",
) -> TrapVerdict:
    """Numerical counterpart of the trap certificate on the grid.

    ``mode="max"`` checks h_plus probes and the largest Hessian eigenvalue
    (negative semi-definite side); ``mode="min"`` checks h_minus and the
    smallest eigenvalue (positive semi-definite side).
    """
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    prop = propagate(task, field)
    g = dcp_residual(task, field, prop)
    c = kcp_residual(task, field, prop)
    checks = {"dcp": g <= tol.grad, "kcp": c <= tol.kcp}

    max_h = np.nan
    if checks["kcp"]:
        vals = []
        for f in probe_directions(field.M, probes, seed):
            sf = spectral_form(task, field, f, prop=prop, kcp_tol=tol.kcp)
            vals.append(sf.h_plus if mode == "max" else sf.h_minus)
        max_h = float(max(vals)) if vals else 0.0
        checks["h_plus_vanishes" if mode == "max" else "h_minus_vanishes"] = max_h <= h_tol
    else:
        checks["h_plus_vanishes" if mode == "max" else "h_minus_vanishes"] = False

    hess = hessian_kernel(task, field, prop).weighted
    eigs = np.linalg.eigvalsh(hess)
    hnorm = frobenius(hess)
    if mode == "max":
        extreme = float(eigs[-1])
        checks["hessian_nsd"] = extreme <= tol.hess * hnorm
    else:
        extreme = float(eigs[0])
        checks["hessian_psd"] = extreme >= -tol.hess * hnorm
    return TrapVerdict(checks, g, c, max_h, extreme, hnorm, mode, probes)
