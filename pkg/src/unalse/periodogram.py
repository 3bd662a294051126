"""Lag-window smoothed periodogram of a multivariate panel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral_core import hermitize

KERNELS = ("bartlett", "parzen")


@dataclass(frozen=True)
class TimeSeriesPanel:
    """A ``p x T`` panel; column ``t`` is the observation vector at time ``t``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"panel must be 2-D (p x T), got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 2:
            raise ValueError(f"panel needs p >= 1 and T >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("panel contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FrequencyGrid:
    bandwidth: int
    frequencies: np.ndarray

    def __len__(self):
        return len(self.frequencies)


def frequency_grid(bandwidth: int, h_max: int | None = None) -> FrequencyGrid:
    """Grid ``h * pi / bandwidth`` for ``h = 0..h_max`` (default ``h_max = bandwidth``)."""
    if int(bandwidth) != bandwidth or bandwidth < 1:
        raise ValueError(f"bandwidth must be a positive integer, got {bandwidth!r}")
    bandwidth = int(bandwidth)
    if h_max is None:
        h_max = bandwidth
    if h_max < 0 or h_max > bandwidth:
        raise ValueError(f"h_max must lie in [0, {bandwidth}], got {h_max}")
    h = np.arange(h_max + 1)
    return FrequencyGrid(bandwidth, h * np.pi / bandwidth)


def default_bandwidth(T: int) -> int:
    return max(1, math.isqrt(int(T)))


def kernel_weight(family: str, u):
    """Lag-window weight ``K(u)``; accepts scalars or arrays."""
    a = np.abs(np.asarray(u, dtype=float))
    if family == "bartlett":
        out = np.where(a <= 1.0, 1.0 - a, 0.0)
    elif family == "parzen":
        out = np.where(
            a <= 0.5,
            1.0 - 6.0 * a**2 + 6.0 * a**3,
            np.where(a <= 1.0, 2.0 * (1.0 - a) ** 3, 0.0),
        )
    else:
        raise ValueError(f"unknown kernel {family!r}; expected one of {KERNELS}")
    return float(out) if out.ndim == 0 else out


def _as_values(X):
    if isinstance(X, TimeSeriesPanel):
        return X.values
    return TimeSeriesPanel(X).values


def sample_autocov(X, k: int, demean: bool = True) -> np.ndarray:
    """Sample autocovariance ``T^-1 sum_t X_t X_{t+k}'`` (real ``p x p``)."""
    V = _as_values(X)
    T = V.shape[1]
    if abs(k) >= T:
        raise IndexError(f"lag {k} out of range for T={T}")
    if demean:
        V = V - V.mean(axis=1, keepdims=True)
    kk = abs(k)
    G = V[:, : T - kk] @ V[:, kk:].T / T
    return G if k >= 0 else G.T


def smoothed_periodogram(
    X,
    kernel: str = "bartlett",
    bandwidth: int | None = None,
    demean: bool = True,
    frequencies=None,
) -> list[np.ndarray]:
    """Kernel-smoothed periodogram at each frequency.

    Parameters
    ----------
    X : TimeSeriesPanel or array_like
        ``p x T`` observations.
    kernel : {"bartlett", "parzen"}
    bandwidth : int, optional
        Lag-window width ``M_T``; defaults to ``floor(sqrt(T))``.
    demean : bool
        Subtract each series' sample mean first.
    frequencies : array_like, optional
        Frequencies in radians. Defaults to the grid ``h * pi / M_T``,
        ``h = 0..M_T``.

    Returns
    -------
    list of ndarray
        One ``p x p`` Hermitian matrix per frequency.
    """
    V = _as_values(X)
    T = V.shape[1]
    if bandwidth is None:
        bandwidth = default_bandwidth(T)
    if int(bandwidth) != bandwidth or bandwidth < 1:
        raise ValueError(f"bandwidth must be a positive integer, got {bandwidth!r}")
    if bandwidth >= T:
        raise ValueError(f"bandwidth {bandwidth} must be smaller than T={T}")
    if frequencies is None:
        frequencies = frequency_grid(bandwidth).frequencies
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))

    if demean:
        V = V - V.mean(axis=1, keepdims=True)
    # K(k / M_T) vanishes for |k| >= M_T with both kernels
    lags = np.arange(int(bandwidth))
    weights = kernel_weight(kernel, lags / bandwidth)
    gammas = np.stack([V[:, : T - k] @ V[:, k:].T / T for k in lags])

    out = []
    for theta in frequencies:
        phase = np.exp(-1j * theta * lags[1:]) * weights[1:]
        # positive lags carry e^{-i theta k} Gamma(k); negative ones are the adjoint
        pos = np.tensordot(phase, gammas[1:], axes=1)
        S = weights[0] * gammas[0] + pos + pos.conj().T
        out.append(hermitize(S / (2.0 * np.pi)))
    return out
