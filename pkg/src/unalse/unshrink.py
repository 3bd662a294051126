"""Un-shrinkage of the latent eigenvalues and residual-diagonal repair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import AlseSolution
from .spectral_core import hermitize, is_positive_definite


@dataclass
class UnalseEstimate:
    L_u: np.ndarray
    S_u: np.ndarray
    sigma_u: np.ndarray
    psi_used: float
    rank: int
    S_pd: bool
    sigma_pd: bool


def unshrink(solution: AlseSolution, psi: float | None = None, diagonal: str = "unshrunk") -> UnalseEstimate:
    """Give the eigenvalue threshold back to the retained latent eigenvalues.

    Parameters
    ----------
    solution : AlseSolution
    psi : float, optional
        Amount added to each retained eigenvalue. Defaults to the threshold the
        solver applied in its last iteration (``solution.psi_effective``).
    diagonal : {"unshrunk", "shrunk"}
        Which latent diagonal is subtracted from ``diag(sigma_hat)`` to get the
        residual diagonal. ``"unshrunk"`` keeps ``diag(sigma_u) == diag(sigma_hat)``.

    Notes
    -----
    The off-diagonal part of ``S_hat`` is kept as is. A negative residual
    diagonal is not clamped; it only shows up in the PD flags.
    """
    if psi is None:
        psi = solution.psi_effective
    if not psi > 0:
        raise ValueError("psi must be positive")
    if diagonal not in ("unshrunk", "shrunk"):
        raise ValueError("diagonal must be 'unshrunk' or 'shrunk'")
    W = solution.L_eigvecs
    p = solution.L_hat.shape[0]
    if solution.rank == 0:
        L_u = np.zeros((p, p), dtype=complex)
    else:
        L_u = hermitize((W * (solution.L_eigvals + psi)) @ W.conj().T)

    ref = L_u if diagonal == "unshrunk" else solution.L_hat
    S_u = np.array(solution.S_hat, dtype=complex)
    np.fill_diagonal(S_u, solution.sigma_hat.diagonal().real - ref.diagonal().real)
    sigma_u = L_u + S_u
    return UnalseEstimate(
        L_u=L_u,
        S_u=S_u,
        sigma_u=sigma_u,
        psi_used=float(psi),
        rank=solution.rank,
        S_pd=is_positive_definite(S_u, 0.0),
        sigma_pd=is_positive_definite(sigma_u, 0.0),
    )
