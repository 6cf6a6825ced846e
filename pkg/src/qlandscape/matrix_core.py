"""Dense complex matrix helpers for small Hermitian and unitary operators.

Every generator in this package is Hermitian, so matrix exponentials are
taken through the Hermitian eigendecomposition. That keeps the results
unitary to round-off, which matters more here than raw speed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MAX_DIM = 64
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class SpectralPair:
    """Eigenvalues (ascending) and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    n = arr.shape[0]
    if n < 2 or n > MAX_DIM:
        raise ValidationError(f"{name} dimension {n} outside supported range 2..{MAX_DIM}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def check_hermitian(a, name: str = "matrix", tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate Hermiticity and return the matrix as a complex array.

    The tolerance is relative to ``max(1, ||a||_F)``. On failure the message
    names the entry pair with the largest mismatch.
    """
    arr = as_matrix(a, name)
    diff = np.abs(arr - arr.conj().T)
    scale = max(1.0, np.linalg.norm(arr))
    if np.linalg.norm(diff) > tol * scale:
        i, j = np.unravel_index(np.argmax(diff), diff.shape)
        raise ValidationError(
            f"{name} is not Hermitian: entries ({i},{j}) and ({j},{i}) "
            f"differ by {diff[i, j]:.3e} (tolerance {tol:.1e})"
        )
    return arr


def dag(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def spectral_decompose(a) -> SpectralPair:
    arr = check_hermitian(a, "spectral_decompose input")
    w, q = np.linalg.eigh(hermitize(arr))
    return SpectralPair(eigenvalues=w, eigenvectors=q)


def expm_generator(h, t: float) -> np.ndarray:
    """Return exp(-i h t) for Hermitian ``h``."""
    arr = check_hermitian(h, "generator")
    w, q = np.linalg.eigh(hermitize(arr))
    return (q * np.exp(-1j * w * t)) @ q.conj().T


def expm_generator_batch(hs: np.ndarray, t: float) -> np.ndarray:
    """Stacked version of :func:`expm_generator` for an (M, n, n) array.

    No validation; callers pass generators they built themselves.
    """
    w, q = np.linalg.eigh(hs)
    return (q * np.exp(-1j * w * t)[..., None, :]) @ dag(q)


def unitarity_defect(u: np.ndarray) -> float:
    n = u.shape[-1]
    return frobenius(dag(u) @ u - np.eye(n))


def random_hermitian(n: int, seed: int) -> np.ndarray:
    """Draw (A + A^dagger)/2 with standard-normal real and imaginary parts."""
    if n < 2:
        raise ValidationError(f"random_hermitian needs n >= 2, got {n}")
    return random_hermitian_rng(n, np.random.default_rng(seed))


def random_hermitian_rng(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def hermitian_to_real(a: np.ndarray) -> np.ndarray:
    """Map Hermitian n x n matrices to R^(n^2) coordinates.

    Layout: diagonal (n), Re of strict upper triangle, Im of strict upper
    triangle. Works on stacks (..., n, n). The map is linear over the reals.
    """
    n = a.shape[-1]
    iu = np.triu_indices(n, 1)
    diag = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    upper = a[..., iu[0], iu[1]]
    return np.concatenate([diag, upper.real, upper.imag], axis=-1)


def real_coordinate_labels(n: int) -> list[str]:
    iu = np.triu_indices(n, 1)
    labels = [f"diag({k + 1})" for k in range(n)]
    labels += [f"re({i + 1},{j + 1})" for i, j in zip(*iu)]
    labels += [f"im({i + 1},{j + 1})" for i, j in zip(*iu)]
    return labels
