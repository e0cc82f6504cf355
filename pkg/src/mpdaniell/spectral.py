"""Periodograms and the Daniell smoothed periodogram on the Fourier grid.

The DFT convention is ``(X V)[:, l] = n**-0.5 * sum_k X[:, k] exp(-2 pi i k l / n)``
(zero-based), i.e. ``numpy.fft.fft(..., norm="ortho")`` along rows.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._rng import innovation_block
from .measures import DiscreteMeasure, esd
from .process import LinearProcessModel, simulate, simulate_circular, transfer_function

__all__ = [
    "FrequencyIndex",
    "SmoothedPeriodogram",
    "grid_index",
    "mod_distance",
    "selector_diag",
    "selected_columns",
    "dft_columns",
    "periodogram",
    "daniell_avg",
    "daniell_matrix",
    "smoothed_from_dft",
    "approx_s_tilde",
    "approx_s_prime",
    "write_eigen_csv",
    "matrix_to_json",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FrequencyIndex:
    r: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 1 or not 0 <= self.r < self.n:
            raise ValueError(f"invalid frequency index r={self.r} for n={self.n}")

    @property
    def theta_snapped(self) -> float:
        return TWO_PI * self.r / self.n


@dataclass(frozen=True)
class SmoothedPeriodogram:
    matrix: NDArray[np.complex128]
    freq: FrequencyIndex
    m: int

    def esd(self) -> DiscreteMeasure:
        return esd(self.matrix)


def grid_index(theta: float, n: int) -> FrequencyIndex:
    """Nearest Fourier frequency ``2 pi r / n`` to ``theta``, with ``r`` reduced mod ``n``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= theta < TWO_PI:
        raise ValueError(f"theta={theta} outside [0, 2 pi)")
    r = math.floor(n * theta / TWO_PI + 0.5) % n
    return FrequencyIndex(r, n)


def mod_distance(r: int, rp: int, n: int) -> int:
    """Distance from ``r`` to the coset ``rp + nZ``."""
    delta = (r - rp) % n
    return min(delta, n - delta)


def _check_bandwidth(n: int, m: int) -> None:
    if m < 0 or 2 * m + 1 > n:
        raise ValueError(f"bandwidth m={m} too large for n={n} (need 2m+1 <= n)")


def selector_diag(r: int, n: int, m: int) -> NDArray[np.int64]:
    """Diagonal of the 0/1 window selector: entry ``s`` (zero-based) is 1 iff dist(r, s) <= m."""
    _check_bandwidth(n, m)
    delta = (r - np.arange(n)) % n
    return (np.minimum(delta, n - delta) <= m).astype(np.int64)


def selected_columns(r: int, n: int, m: int) -> NDArray[np.int64]:
    """Zero-based DFT columns ``r - m, ..., r + m`` (mod ``n``) averaged by the smoother."""
    _check_bandwidth(n, m)
    return (r + np.arange(-m, m + 1)) % n


def dft_columns(X: ArrayLike) -> NDArray[np.complex128]:
    X = np.asarray(X)
    return np.fft.fft(X, axis=1, norm="ortho")


def periodogram(X: ArrayLike, freq: FrequencyIndex, XV: NDArray | None = None) -> NDArray[np.complex128]:
    """Rank-one periodogram ``I(2 pi r / n)`` at a grid frequency."""
    X = np.asarray(X)
    if X.shape[1] != freq.n:
        raise ValueError(f"frequency index built for n={freq.n}, data has n={X.shape[1]}")
    col = (dft_columns(X) if XV is None else XV)[:, freq.r]
    return np.outer(col, col.conj())


def _hermitize(S: NDArray) -> NDArray:
    return 0.5 * (S + S.conj().T)


def daniell_avg(X: ArrayLike, theta: float, m: int) -> SmoothedPeriodogram:
    """Average of the ``2m+1`` periodograms around the snapped frequency."""
    X = np.asarray(X)
    n = X.shape[1]
    _check_bandwidth(n, m)
    freq = grid_index(theta, n)
    XV = dft_columns(X)
    S = np.zeros((X.shape[0], X.shape[0]), dtype=np.complex128)
    for j in range(-m, m + 1):
        S += periodogram(X, FrequencyIndex((freq.r + j) % n, n), XV)
    return SmoothedPeriodogram(_hermitize(S / (2 * m + 1)), freq, m)


def smoothed_from_dft(XV: NDArray[np.complex128], r: int, m: int) -> NDArray[np.complex128]:
    """``(XV) D_r (XV)^* / (2m+1)`` by column selection."""
    Z = XV[:, selected_columns(r, XV.shape[1], m)]
    return _hermitize(Z @ Z.conj().T) / (2 * m + 1)


def daniell_matrix(X: ArrayLike, theta: float, m: int, XV: NDArray | None = None) -> SmoothedPeriodogram:
    """Smoothed periodogram as the Gram matrix of the selected DFT columns.

    Pass a precomputed ``XV = dft_columns(X)`` to reuse it across frequencies.
    """
    X = np.asarray(X)
    n = X.shape[1]
    _check_bandwidth(n, m)
    freq = grid_index(theta, n)
    if XV is None:
        XV = dft_columns(X)
    return SmoothedPeriodogram(smoothed_from_dft(XV, freq.r, m), freq, m)


def approx_s_tilde(model: LinearProcessModel, n: int, theta: float, m: int, seed: int) -> SmoothedPeriodogram:
    """Smoothed periodogram of the circularly wrapped process."""
    Xc = simulate_circular(model, n, seed).data
    return daniell_matrix(Xc, theta, m)


def approx_s_prime(model: LinearProcessModel, n: int, theta: float, m: int, seed: int) -> SmoothedPeriodogram:
    """``G S_eta G^*`` with ``S_eta`` the smoothed periodogram of ``[eta_0..eta_{n-1}]``
    and ``G`` the transfer function at the snapped frequency.

    Computed as the smoothed periodogram of ``G eta`` (``G`` is constant in
    time, so it commutes with the DFT). For a lag-0 model this is the same
    floating-point computation as :func:`smoothed_periodogram`.
    """
    _check_bandwidth(n, m)
    freq = grid_index(theta, n)
    eta = innovation_block(seed, model.innovation_law, model.d, 0, n)
    G = transfer_function(model, freq.theta_snapped)
    if not np.any(G.imag):
        G = np.ascontiguousarray(G.real)
    return SmoothedPeriodogram(smoothed_from_dft(dft_columns(G @ eta), freq.r, m), freq, m)


def smoothed_periodogram(model: LinearProcessModel, n: int, theta: float, m: int, seed: int) -> SmoothedPeriodogram:
    return daniell_matrix(simulate(model, n, seed).data, theta, m)


def write_eigen_csv(path: str | Path, records: Iterable[tuple[int, int, int, int, ArrayLike]]) -> None:
    """Eigenvalue dump: one row per eigenvalue with columns n, d, m, r, lambda."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "d", "m", "r", "lambda"])
        for n, d, m, r, lams in records:
            for lam in np.asarray(lams, dtype=float):
                writer.writerow([n, d, m, r, f"{lam:.17g}"])


def matrix_to_json(A: ArrayLike) -> str:
    A = np.asarray(A)
    if np.iscomplexobj(A):
        return json.dumps({"real": A.real.tolist(), "imag": A.imag.tolist()})
    return json.dumps({"real": A.tolist()})
