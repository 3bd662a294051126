"""Threshold grids, the mini-max MC criterion and the outer tuning loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import NoAdmissibleSolutionError
from .solver import AlseSolution, SolverConfig, alse_solve, gini  # noqa: F401  (gini re-exported)
from .spectral_core import matrix_norm

log = logging.getLogger(__name__)

# stability window for ranks across the psi grid and density cap for residual nonzeros
RANK_SPREAD_MAX = 2
NONZERO_CAP = 0.5


@dataclass(frozen=True)
class ThresholdConfig:
    r_thr: int = 1
    s_thr: float = 1.0
    n_thr: int = 8
    max_outer: int = 10

    def __post_init__(self):
        if self.n_thr < 2 or self.r_thr < 1 or not self.s_thr > 0 or self.max_outer < 0:
            raise ValueError("need n_thr >= 2, r_thr >= 1, s_thr > 0, max_outer >= 0")


@dataclass
class GridCell:
    psi: float
    rho: float
    mc: float
    rank: int
    nonzeros: int
    converged: bool


@dataclass
class SelectionResult:
    psi_star: float
    rho_star: float
    mc_value: float
    solution: AlseSolution
    grid_trace: list
    boundary_flag: bool
    psi_grid: np.ndarray
    rho_grid: np.ndarray
    config: ThresholdConfig
    rounds: list = field(default_factory=list)

    def write_trace(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["psi", "rho", "mc", "rank", "nonzeros", "converged"])
            for c in self.grid_trace:
                w.writerow([repr(c.psi), repr(c.rho), repr(c.mc), c.rank, c.nonzeros, int(c.converged)])


def incoherence_proxy(r_thr: int, p: int) -> float:
    """Geometric mean of the extreme incoherence values, ``(r_thr / p) ** (1/4)``."""
    if not 1 <= r_thr <= p:
        raise ValueError(f"need 1 <= r_thr <= p, got r_thr={r_thr}, p={p}")
    return (r_thr / p) ** 0.25


def psi_grid(p: int, T: int, r_thr: int, n_thr: int) -> np.ndarray:
    top = math.sqrt(p / T) / incoherence_proxy(r_thr, p)
    return np.linspace(top / 2.0, top, n_thr)


def gamma_grid(p: int, s_thr: float, n_thr: int) -> np.ndarray:
    return np.linspace(s_thr * p**-0.5, s_thr * p**-0.25, n_thr)


def rho_grid(p: int, T: int, r_thr: int, s_thr: float, n_thr: int) -> np.ndarray:
    return gamma_grid(p, s_thr, n_thr) * math.sqrt(p / T) / incoherence_proxy(r_thr, p)


def mc_criterion(solution: AlseSolution, psi: float, rho: float) -> float:
    """Mini-max score; degenerate splits (no latent or no residual variance) score ``inf``."""
    tr_sigma = float(np.trace(solution.sigma_hat).real)
    if not tr_sigma > 0:
        return math.inf
    beta = float(np.trace(solution.L_hat).real) / tr_sigma
    if not 0.0 < beta < 1.0:
        return math.inf
    latent = solution.rank * matrix_norm(solution.L_hat, "spectral") / beta
    residual = (psi / rho) * matrix_norm(solution.S_hat, "l1v") / (1.0 - beta)
    return max(latent, residual)


def _solve_cell(args):
    sigma_tilde, cfg = args
    return alse_solve(sigma_tilde, cfg)


def select_thresholds(
    sigma_tilde,
    T: int,
    config: ThresholdConfig,
    solver_defaults: SolverConfig | None = None,
    mapper: Callable = map,
) -> SelectionResult:
    """Solve on the full ``n_thr x n_thr`` threshold grid and keep the MC minimizer.

    Ties are broken by smallest ``psi`` and then smallest ``rho``. ``mapper``
    lets callers run the grid cells through a pool (``executor.map``).
    """
    sigma_tilde = np.asarray(sigma_tilde)
    p = sigma_tilde.shape[0]
    base = solver_defaults or SolverConfig(psi=1.0, rho=1.0)
    psis = psi_grid(p, T, config.r_thr, config.n_thr)
    rhos = rho_grid(p, T, config.r_thr, config.s_thr, config.n_thr)
    pairs = [(a, b) for a in psis for b in rhos]
    sols = list(mapper(_solve_cell, [(sigma_tilde, replace(base, psi=a, rho=b)) for a, b in pairs]))

    trace = []
    best = None
    for (a, b), sol in zip(pairs, sols):
        mc = mc_criterion(sol, a, b)
        trace.append(GridCell(float(a), float(b), mc, sol.rank, sol.nonzero_count, sol.converged))
        key = (mc, a, b)
        if math.isfinite(mc) and (best is None or key < best[0]):
            best = (key, sol)
    if best is None:
        raise NoAdmissibleSolutionError("every threshold pair on the grid gives a degenerate solution")
    (mc, a, b), sol = best
    boundary = bool(a in (psis[0], psis[-1]) or b in (rhos[0], rhos[-1]))
    return SelectionResult(float(a), float(b), float(mc), sol, trace, boundary, psis, rhos, config)


def _column(result: SelectionResult, attr: str, fixed: str):
    """Values of ``attr`` along the grid line through the selected pair."""
    key = result.rho_star if fixed == "rho" else result.psi_star
    cells = [c for c in result.grid_trace if getattr(c, fixed) == key]
    return np.array([getattr(c, attr) for c in cells])


def _adjust(result: SelectionResult, p: int):
    """Return ``(r_thr, s_thr)`` for the next round, or ``None`` when the selection is stable."""
    cfg = result.config
    psis, rhos = result.psi_grid, result.rho_grid
    ranks = _column(result, "rank", "rho")
    r_thr, s_thr = cfg.r_thr, cfg.s_thr

    psi_low = result.psi_star == psis[0]
    psi_high = result.psi_star == psis[-1]
    if psi_low or psi_high or np.ptp(ranks) > RANK_SPREAD_MAX:
        # larger r_thr lowers psi and lets more eigenvalues through
        if psi_low or np.median(ranks) == 0:
            r_thr = min(2 * r_thr, p)
        else:
            r_thr = max(r_thr // 2, 1)

    off_cells = p * (p - 1)
    off_nz = result.solution.nonzero_count - int(
        np.count_nonzero(np.abs(np.diag(result.solution.S_hat)) > 1e-12)
    )
    rho_low = result.rho_star == rhos[0]
    rho_high = result.rho_star == rhos[-1]
    # rho scales with s_thr: a dense fit needs larger rho, a diagonal one smaller
    if off_nz > NONZERO_CAP * off_cells or rho_high:
        s_thr = s_thr * 2.0
    elif off_nz == 0 or rho_low:
        s_thr = s_thr / 2.0

    if (r_thr, s_thr) == (cfg.r_thr, cfg.s_thr):
        return None
    return r_thr, s_thr


def _preference(result: SelectionResult):
    return (result.boundary_flag, result.mc_value)


def auto_tune(
    sigma_tilde,
    T: int,
    initial: ThresholdConfig | None = None,
    solver_defaults: SolverConfig | None = None,
    mapper: Callable = map,
) -> SelectionResult:
    """Repeat :func:`select_thresholds`, moving ``r_thr`` and ``s_thr`` until the choice is interior and stable.

    Rules per round (at most ``max_outer`` rounds):

    * ``psi`` at the lower grid end, or a zero median rank: double ``r_thr`` (cap ``p``).
    * ``psi`` at the upper end, or ranks spreading by more than 2 along the
      selected column: halve ``r_thr`` (floor 1).
    * no off-diagonal residual nonzeros, or ``rho`` at the lower end: halve ``s_thr``.
    * more than half the off-diagonal cells nonzero, or ``rho`` at the upper end: double ``s_thr``.

    Configurations already visited end the loop. The returned result is the
    first non-boundary selection with the lowest MC, else the best boundary one.
    """
    initial = initial or ThresholdConfig()
    sigma_tilde = np.asarray(sigma_tilde)
    p = sigma_tilde.shape[0]
    cfg = initial
    first = select_thresholds(sigma_tilde, T, cfg, solver_defaults, mapper)
    rounds = [first]
    seen = {(cfg.r_thr, cfg.s_thr)}
    current = first
    for _ in range(initial.max_outer):
        nxt = _adjust(current, p)
        if nxt is None or nxt in seen:
            break
        seen.add(nxt)
        cfg = replace(cfg, r_thr=nxt[0], s_thr=nxt[1])
        log.debug("auto_tune: r_thr=%d s_thr=%g", *nxt)
        try:
            current = select_thresholds(sigma_tilde, T, cfg, solver_defaults, mapper)
        except NoAdmissibleSolutionError:
            break
        rounds.append(current)
    if initial.max_outer == 0:
        best = first
    else:
        stable = [r for r in rounds if _adjust(r, p) is None]
        best = stable[-1] if stable else min(rounds, key=_preference)
    best.rounds = [(r.config.r_thr, r.config.s_thr, r.psi_star, r.rho_star, r.boundary_flag) for r in rounds]
    return best
