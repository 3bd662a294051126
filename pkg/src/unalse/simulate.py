"""Ground-truth generation for low-rank plus sparse spectral experiments.

A panel is built as ``X_t = sum_s B_s u_{t-s} + sum_s C_s e_{t-s}`` with
Gaussian white-noise innovations. The common filters ``B_s`` carry a rank
``r`` covariance ``L*`` with a prescribed condition number and trace; the
idiosyncratic filters ``C_s`` carry a thresholded, sparse covariance ``S*``.
Because the filters are known, the true spectral densities follow in closed
form and can be compared with any estimate.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericError
from .periodogram import TimeSeriesPanel
from .spectral_core import hermitize

log = logging.getLogger(__name__)

PSD_REPAIR_ATTEMPTS = 3
REGENERATE_ATTEMPTS = 5


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def orthonormal_basis(p: int, r: int, seed=None, mixing: str = "gaussian") -> np.ndarray:
    """Random ``p x r`` matrix with orthonormal columns.

    The columns of a random permutation matrix are orthonormalized by
    Gram-Schmidt and ``r`` of them are drawn at random. With
    ``mixing="gaussian"`` the permutation matrix is first multiplied by a
    Gaussian matrix; without that, Gram-Schmidt returns coordinate vectors
    and the resulting low-rank matrix is diagonal (maximally coherent).
    """
    if r > p or r < 1:
        raise ValueError(f"need 1 <= r <= p, got r={r}, p={p}")
    rng = _rng(seed)
    P = np.eye(p)[:, rng.permutation(p)]
    if mixing == "gaussian":
        A = rng.standard_normal((p, p)) @ P
    elif mixing == "none":
        A = P
    else:
        raise ValueError(f"unknown mixing {mixing!r}")
    Q, R = np.linalg.qr(A)
    # Gram-Schmidt convention: positive diagonal in R
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    cols = np.sort(rng.choice(p, size=r, replace=False))
    return Q[:, cols]


def low_rank_eigenvalues(r: int, c: float, total: float) -> np.ndarray:
    """``r`` equidistant descending values with ratio ``c`` between first and last and the given sum."""
    if c < 1:
        raise ValueError("condition number must be >= 1")
    if r == 1:
        if c != 1:
            raise ValueError("a rank-1 component has condition number 1")
        return np.array([float(total)])
    last = 2.0 * total / (r * (c + 1.0))
    return last * (1.0 + (c - 1.0) * np.arange(r - 1, -1, -1) / (r - 1))


def gen_low_rank_star(p, r, c, beta, tau, seed=None, mixing="gaussian"):
    """Return ``(L_star, U_L, Lambda_u)`` with ``tr(L_star) = tau * beta * p``."""
    rng = _rng(seed)
    lam = low_rank_eigenvalues(r, c, tau * beta * p)
    U = orthonormal_basis(p, r, rng, mixing=mixing)
    L = (U * lam) @ U.T
    return 0.5 * (L + L.T), U, lam


def _dirichlet_diagonal(rng, mass, order_ref, concentration):
    p = len(order_ref)
    alpha = mass if concentration is None else concentration
    w = rng.dirichlet(np.full(p, max(float(alpha), 1e-8)))
    d = np.empty(p)
    # largest residual variance goes where the reference variance is largest
    d[np.argsort(-np.asarray(order_ref), kind="stable")] = np.sort(w)[::-1] * mass
    return d


def _psd_repair(S, target_trace):
    for _ in range(PSD_REPAIR_ATTEMPTS):
        lam_min = np.linalg.eigvalsh(S)[0]
        if lam_min >= 0:
            return S, True
        S = S + (abs(lam_min) + 1e-6) * np.eye(len(S))
        S = S * (target_trace / np.trace(S))
    return S, np.linalg.eigvalsh(S)[0] >= 0


def _thresholded_sparse(rng, diag, delta, delta_bis):
    p = len(diag)
    S = np.diag(diag)
    iu = np.triu_indices(p, 1)
    bound = delta * np.sqrt(diag[iu[0]] * diag[iu[1]])
    off = rng.uniform(0.0, 1.0, size=bound.shape) * bound
    if off.size and off.max() > 0:
        off[off < delta_bis * off.max()] = 0.0
    S[iu] = off
    S[(iu[1], iu[0])] = off
    return S


def gen_sparse_star(p, beta, tau, delta, delta_bis, L_star, seed=None, concentration=None):
    """Sparse residual covariance ``S*`` with trace ``(1 - beta) * tau * p``.

    Diagonal: Dirichlet weights times the total residual variance, ordered
    like ``diag(L_star)``. ``concentration`` is the symmetric Dirichlet
    parameter; ``None`` uses the total residual variance itself. Off-diagonal
    entries are ``Uniform(0, delta * sqrt(S_ii S_jj))`` and only those at
    least ``delta_bis`` times the largest one survive.
    """
    rng = _rng(seed)
    mass = (1.0 - beta) * tau * p
    for _ in range(REGENERATE_ATTEMPTS):
        d = _dirichlet_diagonal(rng, mass, np.diag(L_star), concentration)
        S = _thresholded_sparse(rng, d, delta, delta_bis)
        S, ok = _psd_repair(S, mass)
        if ok:
            return S
    raise NumericError("could not generate a PSD sparse component")


def _sqrt_factor(M, what):
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    scale = max(1.0, abs(w).max(initial=0.0))
    if w.size and w[0] < -1e-10 * scale:
        raise NumericError(f"{what} is not PSD (min eigenvalue {w[0]:.3g})")
    return U * np.sqrt(np.clip(w, 0.0, None))


def build_filters_basic(U_L, Lambda_u, S_star, lambda_coeffs):
    """Common and idiosyncratic filters that share the scalar lag profile ``lambda_coeffs``."""
    lam = np.asarray(lambda_coeffs, dtype=float)
    B0 = np.asarray(U_L) * np.sqrt(np.asarray(Lambda_u))
    C0 = _sqrt_factor(np.asarray(S_star), "S_star")
    return [B0 * l for l in lam], [C0 * l for l in lam]


def build_filters_general(
    U_L,
    Lambda_u,
    beta,
    tau,
    lambda_coeffs,
    kappa_pert=0.1,
    delta=0.5,
    delta_bis=0.5,
    seed=None,
    concentration=None,
):
    """Filters with per-factor lag perturbations and lag-specific sparse residual patterns.

    Common side: ``B_s = U_L D_s sqrt(Lambda_u)`` where ``D_s`` is diagonal
    with entries ``lambda_s * (1 - kappa_pert + 2 kappa_pert w)``, ``w ~ U(0,1)``.
    Residual side: for every lag a sparse PSD ``Gamma_eps(s)`` is drawn the
    same way as ``S*`` (total variance scaled by ``|lambda_s|``) and factored
    as ``C_s = U_s Lambda_s`` with ``Gamma_eps(s) = U_s Lambda_s^2 U_s'``.
    """
    rng = _rng(seed)
    U_L = np.asarray(U_L)
    Lambda_u = np.asarray(Lambda_u)
    lam = np.asarray(lambda_coeffs, dtype=float)
    p, r = U_L.shape
    sq = np.sqrt(Lambda_u)

    B = []
    for l in lam:
        dvec = l * (1.0 - kappa_pert + 2.0 * kappa_pert * rng.uniform(0.0, 1.0, size=r))
        B.append((U_L * dvec) * sq)
    gamma_chi0 = sum(b @ b.T for b in B)

    C = []
    for s, l in enumerate(lam):
        mass = (1.0 - beta) * tau * p * abs(l)
        if mass == 0:
            C.append(np.zeros((p, p)))
            continue
        conc = None if concentration is None else concentration
        for attempt in range(REGENERATE_ATTEMPTS):
            d = _dirichlet_diagonal(rng, mass, np.diag(gamma_chi0), conc)
            G, ok = _psd_repair(_thresholded_sparse(rng, d, delta, delta_bis), mass)
            if ok:
                break
            log.debug("lag %d residual not PSD after repair, regenerating (attempt %d)", s, attempt + 1)
        else:
            raise NumericError(f"could not generate a PSD residual autocovariance at lag {s}")
        C.append(_sqrt_factor(G, f"Gamma_eps({s})"))
    return B, C


def vma_generate(B, C, T: int, burn_in: int | None = None, seed=None) -> TimeSeriesPanel:
    """Simulate ``T`` observations of the two-component vector moving average."""
    rng = _rng(seed)
    n_l = max(len(B), len(C)) - 1
    if burn_in is None:
        burn_in = 50 + n_l
    burn_in = max(int(burn_in), n_l)
    n = T + burn_in
    p = (B[0] if len(B) else C[0]).shape[0]
    X = np.zeros((p, n))
    for filters in (B, C):
        if not len(filters):
            continue
        k = filters[0].shape[1]
        shocks = rng.standard_normal((k, n))
        for s, F in enumerate(filters):
            X[:, s:] += F @ shocks[:, : n - s]
    return TimeSeriesPanel(X[:, burn_in:])


def transfer(filters, theta) -> np.ndarray:
    return sum(F * np.exp(-1j * s * theta) for s, F in enumerate(filters))


def true_spectra(B, C, frequencies):
    """Exact spectral densities ``L(theta)`` and ``S(theta)``, normalized by ``2 pi``."""
    L_out, S_out = [], []
    for theta in np.atleast_1d(frequencies):
        Bt = transfer(B, theta)
        Ct = transfer(C, theta)
        L_out.append(hermitize(Bt @ Bt.conj().T / (2 * np.pi)))
        S_out.append(hermitize(Ct @ Ct.conj().T / (2 * np.pi)))
    return L_out, S_out


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of one simulated design.

    ``frequencies`` defaults to ``pi * h / 12`` for ``h = 0..5``.
    ``dirichlet_concentration=None`` draws residual variances from a symmetric
    Dirichlet whose parameter equals the total residual variance.
    """

    p: int = 50
    T: int = 500
    r: int = 2
    c: float = 2.0
    beta: float = 0.6
    tau: float = 5.0
    delta: float = 0.5
    delta_bis: float = 0.95
    lambda_coeffs: tuple = (0.8, 0.2)
    scenario: str = "basic"
    kappa_pert: float = 0.1
    normalize_lambda: bool = False
    dirichlet_concentration: float | None = None
    basis_mixing: str = "gaussian"
    burn_in: int | None = None
    frequencies: tuple = tuple(np.pi * h / 12 for h in range(6))
    seed: int = 0

    def __post_init__(self):
        if not self.r < self.p:
            raise ValueError("need r < p")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.scenario not in ("basic", "general"):
            raise ValueError("scenario must be 'basic' or 'general'")

    @property
    def lambdas(self) -> np.ndarray:
        lam = np.asarray(self.lambda_coeffs, dtype=float)
        if self.normalize_lambda:
            lam = lam / np.sqrt(np.sum(lam**2))
        return lam

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda_coeffs"] = list(self.lambda_coeffs)
        d["frequencies"] = [float(f) for f in self.frequencies]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        d = dict(d)
        d["lambda_coeffs"] = tuple(d["lambda_coeffs"])
        d["frequencies"] = tuple(d["frequencies"])
        return cls(**d)


@dataclass
class SimulationTruth:
    config: SimulationConfig
    panel: TimeSeriesPanel
    frequencies: np.ndarray
    L_true: list
    S_true: list
    L_star: np.ndarray
    S_star: np.ndarray
    B: list
    C: list
    extras: dict = field(default_factory=dict)

    @property
    def sigma_true(self) -> list:
        return [L + S for L, S in zip(self.L_true, self.S_true)]


def simulate(config: SimulationConfig) -> SimulationTruth:
    """Draw filters, a sample path and the exact spectra for one replication."""
    rng = np.random.default_rng(config.seed)
    lam = config.lambdas
    L_star, U_L, Lambda_u = gen_low_rank_star(
        config.p, config.r, config.c, config.beta, config.tau, rng, mixing=config.basis_mixing
    )
    if config.scenario == "basic":
        S_star = gen_sparse_star(
            config.p, config.beta, config.tau, config.delta, config.delta_bis, L_star, rng,
            concentration=config.dirichlet_concentration,
        )
        B, C = build_filters_basic(U_L, Lambda_u, S_star, lam)
    else:
        B, C = build_filters_general(
            U_L, Lambda_u, config.beta, config.tau, lam, config.kappa_pert, config.delta,
            config.delta_bis, rng, concentration=config.dirichlet_concentration,
        )
        S_star = sum(c @ c.T for c in C)
    panel = vma_generate(B, C, config.T, config.burn_in, rng)
    freqs = np.asarray(config.frequencies, dtype=float)
    L_true, S_true = true_spectra(B, C, freqs)
    return SimulationTruth(
        config=config,
        panel=panel,
        frequencies=freqs,
        L_true=L_true,
        S_true=S_true,
        L_star=L_star,
        S_star=S_star,
        B=B,
        C=C,
        extras={"U_L": U_L, "Lambda_u": Lambda_u},
    )


# Named designs. Dimensions follow the published study; magnitude constants
# (tau, c, beta, delta, delta_bis) are documented defaults of this package.
_SETTINGS = {
    1: dict(p=100, T=1000, r=3, c=2.0, beta=0.5, delta=0.8, delta_bis=0.8),
    2: dict(p=100, T=1000, r=4, c=2.0, beta=0.6, delta=0.8, delta_bis=0.7),
    3: dict(p=100, T=1000, r=5, c=3.0, beta=0.6, delta=0.8, delta_bis=0.6),
    4: dict(p=150, T=150, r=3, c=2.0, beta=0.8, delta=0.8, delta_bis=0.8),
    5: dict(p=200, T=100, r=4, c=2.0, beta=0.7, delta=0.8, delta_bis=0.7),
}
_SCENARIOS = {
    "A": dict(scenario="basic"),
    "B": dict(scenario="general", delta_bis=0.9),
    "C": dict(scenario="general"),
}
DESK = SimulationConfig()


def preset(scenario: str, setting: int | str, seed: int = 0, **overrides) -> SimulationConfig:
    """Named design: ``scenario`` in A/B/C and ``setting`` in 1..5 or ``"desk"``."""
    scenario = scenario.upper()
    if scenario not in _SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if setting == "desk":
        base = DESK.to_dict()
    else:
        setting = int(setting)
        if setting not in _SETTINGS:
            raise ValueError(f"unknown setting {setting!r}")
        base = {**DESK.to_dict(), **_SETTINGS[setting]}
    params = {**base, **_SCENARIOS[scenario], **overrides, "seed": seed}
    return SimulationConfig.from_dict(params)
