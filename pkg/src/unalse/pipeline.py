"""End-to-end estimation: periodogram, threshold selection, solve, unshrink."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import NotPositiveDefiniteError
from .io import EstimateBundle
from .metrics import beta_hat, zeta_hat
from .periodogram import TimeSeriesPanel, default_bandwidth, frequency_grid, smoothed_periodogram
from .selection import ThresholdConfig, auto_tune, mc_criterion, select_thresholds
from .solver import SolverConfig, alse_solve
from .spectral_core import ZERO_TOL, eigh, inverse_if_pd
from .unshrink import unshrink

log = logging.getLogger(__name__)

N_TOP_EIGENVALUES = 5


@dataclass(frozen=True)
class EstimateOptions:
    """Settings of one estimation run.

    ``psi``/``rho`` given together bypass selection. Otherwise the thresholds
    come from one grid search, or from the outer tuning loop when
    ``auto_select`` is set. ``grid``/``grid_max`` replace the default
    frequency grid ``h * pi / M_T`` by ``h * pi / grid`` for ``h = 0..grid_max``;
    explicit ``frequencies`` take precedence over both.
    """

    kernel: str = "bartlett"
    bandwidth: int | None = None
    demean: bool = True
    grid: int | None = None
    grid_max: int | None = None
    frequencies: tuple | None = None
    psi: float | None = None
    rho: float | None = None
    auto_select: bool = False
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    varsigma: float = 0.01
    max_iterations: int = 500
    gini_adaptation: bool = True
    with_inverse: bool = False
    workers: int = 1
    seed: int | None = None

    def __post_init__(self):
        if (self.psi is None) != (self.rho is None):
            raise ValueError("psi and rho must be given together")
        if self.psi is not None and self.auto_select:
            raise ValueError("manual psi/rho cannot be combined with auto_select")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def manual(self) -> bool:
        return self.psi is not None

    def resolve_frequencies(self, bandwidth: int) -> np.ndarray:
        if self.frequencies is not None:
            return np.asarray(self.frequencies, dtype=float)
        if self.grid is not None:
            return frequency_grid(self.grid, self.grid_max).frequencies
        return frequency_grid(bandwidth, self.grid_max).frequencies


def _estimate_one(args):
    sigma_tilde, T, opts = args
    solver = SolverConfig(
        psi=opts.psi or 1.0,
        rho=opts.rho or 1.0,
        varsigma=opts.varsigma,
        max_iterations=opts.max_iterations,
        gini_adaptation=opts.gini_adaptation,
    )
    info = {}
    if opts.manual:
        sol = alse_solve(sigma_tilde, solver)
        psi, rho = opts.psi, opts.rho
        info.update(mc=mc_criterion(sol, psi, rho), boundary=False, rounds=[])
    else:
        fn = auto_tune if opts.auto_select else select_thresholds
        res = fn(sigma_tilde, T, opts.thresholds, solver)
        sol, psi, rho = res.solution, res.psi_star, res.rho_star
        info.update(
            mc=res.mc_value,
            boundary=res.boundary_flag,
            rounds=[list(r) for r in res.rounds],
            r_thr=res.config.r_thr,
            s_thr=res.config.s_thr,
        )
    est = unshrink(sol)
    return sol, est, psi, rho, info


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def estimate_panel(panel, T: int | None = None, options: EstimateOptions | None = None) -> EstimateBundle:
    """Run the full estimator on a ``p x T`` panel and pack the result.

    Frequencies are processed independently; with ``workers > 1`` they run in
    a process pool. The output does not depend on the worker count.
    """
    opts = options or EstimateOptions()
    X = panel if isinstance(panel, TimeSeriesPanel) else TimeSeriesPanel(np.asarray(panel, dtype=float))
    T = X.T if T is None else T
    M = opts.bandwidth or default_bandwidth(X.T)
    freqs = opts.resolve_frequencies(M)
    sig = smoothed_periodogram(X, kernel=opts.kernel, bandwidth=M, demean=opts.demean, frequencies=freqs)

    jobs = [(s, T, opts) for s in sig]
    if opts.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(opts.workers, len(jobs))) as ex:
            out = list(ex.map(_estimate_one, jobs))
    else:
        out = [_estimate_one(j) for j in jobs]

    p = X.p
    mats = {"L": [], "S": [], "Sigma": [], "Sigma_tilde": list(sig)}
    if opts.with_inverse:
        mats["S_inv"], mats["Sigma_inv"] = [], []
    per_freq = []
    for h, ((sol, est, psi, rho, info), theta, s) in enumerate(zip(out, freqs, sig)):
        mats["L"].append(est.L_u)
        mats["S"].append(est.S_u)
        mats["Sigma"].append(est.sigma_u)
        off_nz = int(np.count_nonzero(np.abs(est.S_u - np.diag(np.diag(est.S_u))) > ZERO_TOL))
        try:
            zeta = zeta_hat(est.S_u, est.sigma_u)
        except ValueError:
            zeta = None
        top = eigh(s).eigenvalues[: min(N_TOP_EIGENVALUES, p)] / p
        rec = {
            "h": h,
            "frequency": float(theta),
            "rank": est.rank,
            "psi": float(psi),
            "rho": float(rho),
            "psi_effective": sol.psi_effective,
            "beta_hat": beta_hat(est.L_u, est.sigma_u),
            "zeta_hat": zeta,
            "nonzero_count": int(np.count_nonzero(np.abs(est.S_u) > ZERO_TOL)),
            "nonzero_fraction": off_nz / (p * (p - 1)) if p > 1 else 0.0,
            "converged": sol.converged,
            "iterations": sol.iterations,
            "mc": _jsonable(float(info["mc"])),
            "boundary": info["boundary"],
            "S_pd": est.S_pd,
            "sigma_pd": est.sigma_pd,
            "top_eigenvalues_over_p": [float(v) for v in top],
        }
        if "r_thr" in info:
            rec.update(r_thr=info["r_thr"], s_thr=info["s_thr"], rounds=info["rounds"])
        if opts.with_inverse:
            for name, src, flag in (("S_inv", est.S_u, "S_inv_ok"), ("Sigma_inv", est.sigma_u, "sigma_inv_ok")):
                try:
                    mats[name].append(inverse_if_pd(src))
                    rec[flag] = True
                except NotPositiveDefiniteError:
                    # keep the file count aligned; NaN marks a missing inverse
                    mats[name].append(np.full((p, p), np.nan, dtype=complex))
                    rec[flag] = False
        per_freq.append(rec)

    opt_dict = asdict(opts)
    del opt_dict["workers"]  # results do not depend on it
    opt_dict["frequencies"] = None if opts.frequencies is None else [float(f) for f in opts.frequencies]
    manifest = {
        "kind": "estimate",
        "tool_version": __version__,
        "p": p,
        "T": int(T),
        "M_T": int(M),
        "kernel": opts.kernel,
        "demean": opts.demean,
        "seed": opts.seed,
        "mode": "manual" if opts.manual else ("auto_select" if opts.auto_select else "select"),
        "options": opt_dict,
        "frequencies": [float(f) for f in freqs],
        "per_frequency": per_freq,
    }
    return EstimateBundle(manifest=manifest, matrices=mats)
