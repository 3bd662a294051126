import numpy as np
import pytest

from unalse.periodogram import smoothed_periodogram
from unalse.selection import select_thresholds, ThresholdConfig
from unalse.simulate import SimulationConfig, simulate
from unalse.solver import AlseSolution, SolverConfig, alse_solve
from unalse.spectral_core import eigh, is_hermitian
from unalse.unshrink import unshrink


def _solution(vals, vecs, S):
    vals = np.asarray(vals, float)
    L = (vecs * vals) @ vecs.conj().T
    return AlseSolution(L, S, L + S, len(vals), int(np.count_nonzero(S)), 1, True, 0.0, vals, vecs, 0.5)


def test_eigenvalues_gain_psi(rng):
    Q = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))[0][:, :2]
    S = np.diag([1.0, 1.0, 1.0, 1.0]).astype(complex)
    est = unshrink(_solution([2.0, 1.0], Q, S), psi=0.5)
    dec = eigh(est.L_u)
    np.testing.assert_allclose(dec.eigenvalues[:2], [2.5, 1.5], atol=1e-12)
    np.testing.assert_allclose(np.abs(dec.eigenvectors[:, :2].conj().T @ Q), np.eye(2), atol=1e-10)
    assert est.rank == 2
    np.testing.assert_array_equal(est.sigma_u, est.L_u + est.S_u)


def test_rank_zero_keeps_sigma():
    S = np.array([[2.0, 0.3], [0.3, 1.0]], dtype=complex)
    sol = _solution([], np.zeros((2, 0)), S)
    est = unshrink(sol, psi=0.5)
    np.testing.assert_array_equal(est.L_u, 0)
    np.testing.assert_array_equal(est.S_u, S)
    assert est.S_pd and est.sigma_pd


def test_negative_residual_diagonal_is_flagged_not_clamped():
    v = np.array([[1.0], [0.0]], dtype=complex)
    sol = _solution([1.0], v, np.zeros((2, 2), dtype=complex))
    est = unshrink(sol, psi=0.5)
    assert est.S_u[0, 0] == pytest.approx(-0.5)
    assert not est.S_pd


def test_shrunk_diagonal_switch():
    v = np.array([[1.0], [0.0]], dtype=complex)
    S = np.diag([0.2, 0.3]).astype(complex)
    est = unshrink(_solution([1.0], v, S), psi=0.5, diagonal="shrunk")
    np.testing.assert_allclose(est.S_u.diagonal(), [0.2, 0.3])
    with pytest.raises(ValueError):
        unshrink(_solution([1.0], v, S), diagonal="other")
    with pytest.raises(ValueError):
        unshrink(_solution([1.0], v, S), psi=0.0)


def test_default_psi_is_effective_threshold():
    tr = simulate(SimulationConfig(p=10, T=300, r=1, c=1.0, seed=2))
    sig = smoothed_periodogram(tr.panel, frequencies=[0.0])[0]
    sol = alse_solve(sig, SolverConfig(psi=0.4, rho=0.1))
    assert unshrink(sol).psi_used == sol.psi_effective


def test_contracts_on_pipeline_output():
    tr = simulate(SimulationConfig(p=10, T=500, r=1, c=1.0, seed=6))
    for sig in smoothed_periodogram(tr.panel, frequencies=tr.frequencies):
        sol = select_thresholds(sig, 500, ThresholdConfig(n_thr=4)).solution
        est = unshrink(sol)
        np.testing.assert_allclose(est.sigma_u.diagonal(), sol.sigma_hat.diagonal(), atol=1e-12, rtol=0)
        off = ~np.eye(10, dtype=bool)
        np.testing.assert_array_equal(est.S_u[off], sol.S_hat[off])
        assert int(np.sum(eigh(est.L_u).eigenvalues > 1e-10)) == sol.rank
        for M in (est.L_u, est.S_u, est.sigma_u):
            assert is_hermitian(M)
