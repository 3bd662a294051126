"""Hermitian matrix utilities: symmetrization, eigendecomposition, norms, PD gate.

Matrices are plain ``numpy.ndarray`` objects of complex dtype. The functions
here never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, NotPositiveDefiniteError, NumericError

ZERO_TOL = 1e-12

NORM_KINDS = ("l0", "l1", "frobenius", "max", "l0v", "l1v", "linfv", "spectral", "nuclear", "min_off")


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted descending and matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def _check_square(M):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return M


def hermitize(M) -> np.ndarray:
    """Return ``(M + M^H) / 2`` as a complex array."""
    M = _check_square(M).astype(complex)
    H = 0.5 * (M + M.conj().T)
    # exact real diagonal; the average above already is, but guard -0j artefacts
    H[np.diag_indices_from(H)] = H.diagonal().real
    return H


def is_hermitian(M, tol: float = 1e-12) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol * scale)


def eigh(M) -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix.

    Eigenvalues come out in descending order. Each eigenvector is rotated so
    that its largest-modulus component is real and positive, which makes the
    output reproducible for matrices with simple spectra.
    """
    M = _check_square(M)
    if not np.all(np.isfinite(M)):
        raise NumericError("matrix has non-finite entries")
    w, U = np.linalg.eigh(M.astype(complex))
    w = w[::-1].copy()
    U = U[:, ::-1].copy()
    if U.size:
        idx = np.argmax(np.abs(U), axis=0)
        pivot = U[idx, np.arange(U.shape[1])]
        U = U * (pivot.conj() / np.abs(pivot))
    return EigenDecomposition(w, U)


def matrix_norm(M, kind: str, tol: float = ZERO_TOL) -> float:
    """Matrix norms used throughout the estimator.

    Parameters
    ----------
    M : array_like
        Square complex matrix.
    kind : str
        One of ``l0`` (nonzero count), ``l1`` (entrywise absolute sum),
        ``frobenius``, ``max`` (largest modulus), ``l0v`` (max nonzeros per
        row), ``l1v`` (max column absolute sum), ``linfv`` (max row absolute
        sum), ``spectral``, ``nuclear`` (trace, PSD input only) and
        ``min_off`` (smallest nonzero off-diagonal modulus).
    tol : float
        Moduli at or below ``tol`` count as zero for ``l0``, ``l0v`` and
        ``min_off``, and bound the admissible negative eigenvalue for ``nuclear``.
    """
    M = np.asarray(M)
    A = np.abs(M)
    if kind == "l0":
        return float(np.count_nonzero(A > tol))
    if kind == "l1":
        return float(A.sum())
    if kind == "frobenius":
        return float(np.sqrt(np.sum(A**2)))
    if kind == "max":
        return float(A.max(initial=0.0))
    if kind == "l0v":
        return float(np.count_nonzero(A > tol, axis=1).max(initial=0))
    if kind == "l1v":
        return float(A.sum(axis=0).max(initial=0.0))
    if kind == "linfv":
        return float(A.sum(axis=1).max(initial=0.0))
    if kind == "spectral":
        return float(np.linalg.norm(M, 2)) if M.size else 0.0
    if kind == "nuclear":
        M = _check_square(M)
        w = np.linalg.eigvalsh(hermitize(M))
        scale = max(1.0, float(np.abs(w).max(initial=0.0)))
        if w.size and w[0] < -max(tol, 1e-10) * scale:
            raise DegenerateInputError("nuclear norm as trace requires a PSD matrix")
        return float(np.trace(M).real)
    if kind == "min_off":
        M = _check_square(M)
        off = A[~np.eye(M.shape[0], dtype=bool)]
        off = off[off > tol]
        if off.size == 0:
            raise DegenerateInputError("no nonzero off-diagonal entry")
        return float(off.min())
    raise ValueError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def min_eigenvalue(M) -> float:
    M = _check_square(M)
    if M.shape[0] == 0:
        return np.inf
    return float(np.linalg.eigvalsh(hermitize(M))[0])


def is_positive_definite(M, tol: float = 0.0) -> bool:
    return min_eigenvalue(M) > tol


def inverse_if_pd(M, tol: float = 0.0) -> np.ndarray:
    """Invert a Hermitian matrix through its eigendecomposition.

    Raises
    ------
    NotPositiveDefiniteError
        If the smallest eigenvalue does not exceed ``tol``.
    """
    dec = eigh(hermitize(M))
    lam_min = dec.eigenvalues[-1] if dec.eigenvalues.size else np.inf
    if not lam_min > tol:
        raise NotPositiveDefiniteError(lam_min)
    U = dec.eigenvectors
    return hermitize((U / dec.eigenvalues) @ U.conj().T)
