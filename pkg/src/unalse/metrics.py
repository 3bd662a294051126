"""Evaluation statistics for simulated replications and the dynamic-PCA baseline.

Rates that are undefined for a given replication (an empty reference set)
come back as ``nan`` and are left out of averages; the number of exclusions
is reported next to each mean.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError
from .spectral_core import eigh, matrix_norm

TRUTH_TOL = 1e-8


def beta_hat(L, Sigma) -> float:
    """Latent variance proportion ``tr(L) / tr(Sigma)``."""
    tr = float(np.trace(Sigma).real)
    if tr == 0:
        raise DegenerateInputError("Sigma has zero trace")
    return float(np.trace(L).real) / tr


def _upper_abs_sum(M):
    M = np.asarray(M)
    return float(np.abs(M[np.triu_indices(M.shape[0], 1)]).sum())


def zeta_hat(S, Sigma) -> float:
    """Share of off-diagonal mass carried by the residual component."""
    den = _upper_abs_sum(Sigma)
    if den == 0:
        raise DegenerateInputError("Sigma has no off-diagonal mass")
    return _upper_abs_sum(S) / den


def sparsity_predictive(S_hat, S_true, tol: float = 1e-12, truth_tol: float = TRUTH_TOL):
    """Upper-triangle recovery rates ``(nzpv, ppv, npv)``.

    * nzpv: share of predicted nonzeros that are true nonzeros.
    * ppv: share of truly positive entries estimated positive.
    * npv: share of truly negative entries estimated negative.

    Signs are read from real parts. A rate with an empty reference set is ``nan``.
    """
    S_hat, S_true = np.asarray(S_hat), np.asarray(S_true)
    if S_hat.shape != S_true.shape:
        raise ValueError("S_hat and S_true must have the same shape")
    iu = np.triu_indices(S_hat.shape[0], 1)
    e, t = S_hat[iu], S_true[iu]
    e_nz, t_nz = np.abs(e) > tol, np.abs(t) > truth_tol
    e_pos, e_neg = e.real > tol, e.real < -tol
    t_pos, t_neg = t.real > truth_tol, t.real < -truth_tol

    def rate(hit, ref):
        n = int(ref.sum())
        return float((hit & ref).sum()) / n if n else math.nan

    return rate(t_nz, e_nz), rate(e_pos, t_pos), rate(e_neg, t_neg)


def mnz(estimates, tol: float = 1e-12) -> np.ndarray:
    """Per variable, the largest count (over partners ``j``) of replications with a nonzero ``S_ij``."""
    if len(estimates) == 0:
        raise ValueError("need at least one estimate")
    counts = sum((np.abs(np.asarray(S)) > tol).astype(int) for S in estimates)
    np.fill_diagonal(counts, 0)
    return counts.max(axis=1)


def err_frobenius(M_hat, M_true, p: int | None = None) -> float:
    M_hat = np.asarray(M_hat)
    p = M_hat.shape[0] if p is None else p
    return matrix_norm(M_hat - np.asarray(M_true), "frobenius") / p


def err_ratio(Sigma_hat, Sigma_tilde, Sigma_true) -> float:
    den = matrix_norm(np.asarray(Sigma_tilde) - np.asarray(Sigma_true), "frobenius")
    if den == 0:
        raise DegenerateInputError("pre-estimator coincides with the target")
    return matrix_norm(np.asarray(Sigma_hat) - np.asarray(Sigma_true), "frobenius") / den


def g_gamma_loss(L_hat, L_true, S_hat, S_true, gamma: float) -> float:
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return max(
        matrix_norm(np.asarray(S_hat) - np.asarray(S_true), "max") / gamma,
        matrix_norm(np.asarray(L_hat) - np.asarray(L_true), "spectral"),
    )


def dyn_pca(sigma_tilde, r: int) -> np.ndarray:
    """Rank-``r`` dynamic principal component estimate of the common spectrum."""
    sigma_tilde = np.asarray(sigma_tilde)
    p = sigma_tilde.shape[0]
    if not 1 <= r <= p:
        raise ValueError(f"need 1 <= r <= p, got r={r}")
    dec = eigh(sigma_tilde)
    U = dec.eigenvectors[:, :r]
    return (U * dec.eigenvalues[:r]) @ U.conj().T


def rank_correct_count(rank_hats, r_true: int) -> float:
    """``(1/H) * #{(b, h): rank_hat == r_true}`` for a replications x frequencies table."""
    a = np.atleast_2d(np.asarray(rank_hats))
    H = a.shape[1]
    return float(np.sum(a == r_true)) / H


def _mean_sd(values):
    a = np.asarray(values, dtype=float)
    ok = a[~np.isnan(a)]
    if ok.size == 0:
        return {"mean": None, "sd": None, "excluded": int(a.size)}
    return {
        "mean": float(ok.mean()),
        "sd": float(ok.std(ddof=1)) if ok.size > 1 else 0.0,
        "excluded": int(a.size - ok.size),
    }


PER_FREQUENCY = ("beta_hat", "zeta_hat", "rank_hat", "nzpv", "ppv", "npv", "err_L", "err_ratio", "g_gamma")


@dataclass
class EvaluationReport:
    """Replication means and standard deviations, one row per frequency."""

    frequencies: list
    r_true: int
    n_reps: int
    table: dict  # metric -> list (per frequency) of {"mean", "sd", "excluded"}
    mnz: list  # per frequency, per-variable counts
    rank_correct: float
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "frequencies": list(self.frequencies),
            "r_true": self.r_true,
            "n_reps": self.n_reps,
            "rank_correct": self.rank_correct,
            "metrics": self.table,
            "mnz": self.mnz,
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def to_csv(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, rows in self.table.items():
            with open(d / f"{name}.csv", "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["h", "frequency", "mean", "sd", "excluded"])
                for h, (theta, row) in enumerate(zip(self.frequencies, rows)):
                    w.writerow([h, repr(theta), row["mean"], row["sd"], row["excluded"]])


def evaluate(records, r_true: int, frequencies, gamma: float = 1.0, tol: float = 1e-12) -> EvaluationReport:
    """Aggregate metrics over replications.

    ``records`` is a list (replications) of lists (frequencies) of dicts with
    keys ``L_hat``, ``S_hat``, ``sigma_hat``, ``sigma_tilde``, ``L_true``,
    ``S_true`` and ``rank``, plus an optional per-cell ``gamma`` that
    overrides the default loss weight.
    """
    B = len(records)
    H = len(frequencies)
    raw = {k: np.full((B, H), np.nan) for k in PER_FREQUENCY}
    for b, rep in enumerate(records):
        if len(rep) != H:
            raise ValueError(f"replication {b} has {len(rep)} frequencies, expected {H}")
        for h, c in enumerate(rep):
            sig_true = c["L_true"] + c["S_true"]
            p = sig_true.shape[0]
            raw["beta_hat"][b, h] = beta_hat(c["L_hat"], c["sigma_hat"])
            try:
                raw["zeta_hat"][b, h] = zeta_hat(c["S_hat"], c["sigma_hat"])
            except DegenerateInputError:
                pass
            raw["rank_hat"][b, h] = c["rank"]
            nz, pp, nn = sparsity_predictive(c["S_hat"], c["S_true"], tol)
            raw["nzpv"][b, h], raw["ppv"][b, h], raw["npv"][b, h] = nz, pp, nn
            raw["err_L"][b, h] = err_frobenius(c["L_hat"], c["L_true"], p)
            raw["err_ratio"][b, h] = err_ratio(c["sigma_hat"], c["sigma_tilde"], sig_true)
            raw["g_gamma"][b, h] = g_gamma_loss(c["L_hat"], c["L_true"], c["S_hat"], c["S_true"], c.get("gamma", gamma))
    table = {k: [_mean_sd(raw[k][:, h]) for h in range(H)] for k in PER_FREQUENCY}
    mnz_rows = [mnz([records[b][h]["S_hat"] for b in range(B)], tol).tolist() for h in range(H)]
    return EvaluationReport(
        frequencies=[float(f) for f in frequencies],
        r_true=r_true,
        n_reps=B,
        table=table,
        mnz=mnz_rows,
        rank_correct=rank_correct_count(raw["rank_hat"], r_true),
        raw=raw,
    )
