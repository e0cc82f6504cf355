"""Isotropic Wishart sampling and the Wishart structure of the smoothed
periodogram of Gaussian innovations.

DFT columns are 1-based in the comments below, zero-based in the code.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._rng import AUXILIARY_STREAM, innovation_block, task_seed
from .spectral import dft_columns, smoothed_from_dft

__all__ = [
    "WishartSample",
    "CouplingReport",
    "sample_wishart",
    "smoothed_gram",
    "wishart_coupling_check",
    "almost_wishart_residual",
    "numerical_rank",
    "RANK_RTOL",
    "Z_FLAG",
]

RANK_RTOL = 1e-8
Z_FLAG = 4.0


@dataclass(frozen=True)
class WishartSample:
    matrix: NDArray
    flavor: str
    dof: int

    def __post_init__(self) -> None:
        if self.flavor not in ("real", "complex"):
            raise ValueError(f"flavor must be 'real' or 'complex', got {self.flavor!r}")
        if self.flavor == "real" and np.iscomplexobj(self.matrix) and np.any(self.matrix.imag):
            raise ValueError("real Wishart sample has imaginary entries")


def sample_wishart(flavor: str, d: int, dof: int, seed: int) -> WishartSample:
    """``Z Z^*`` with ``Z`` a ``d x dof`` standard (real or complex) Gaussian matrix."""
    if dof < 1 or d < 1:
        raise ValueError("d and dof must be positive")
    rng = np.random.default_rng(seed)
    if flavor == "real":
        Z = rng.standard_normal((d, dof))
        return WishartSample(Z @ Z.T, flavor, dof)
    if flavor == "complex":
        Z = (rng.standard_normal((d, dof)) + 1j * rng.standard_normal((d, dof))) / math.sqrt(2.0)
        W = Z @ Z.conj().T
        return WishartSample(0.5 * (W + W.conj().T), flavor, dof)
    raise ValueError(f"flavor must be 'real' or 'complex', got {flavor!r}")


def smoothed_gram(eta: ArrayLike, r: int, m: int) -> NDArray[np.complex128]:
    """``eta V D_r V^* eta^T``: the unnormalized Daniell Gram matrix."""
    eta = np.asarray(eta, dtype=np.float64)
    return smoothed_from_dft(dft_columns(eta), r, m) * (2 * m + 1)


def _circle_distance(a: float, b: float, n: int) -> float:
    delta = (a - b) % n
    return min(delta, n - delta)


@dataclass(frozen=True)
class CouplingReport:
    n: int
    d: int
    m: int
    r: int
    seed: int
    reps: int
    mean_trace_gram: float
    mean_trace_wishart: float
    z_trace: float
    mean_trace_sq_gram: float
    mean_trace_sq_wishart: float
    z_trace_sq: float
    flagged: bool

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _two_sample_z(a: NDArray, b: NDArray) -> float:
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    return float((a.mean() - b.mean()) / se) if se > 0 else 0.0


def wishart_coupling_check(n: int, d: int, m: int, r: int, seed: int, reps: int) -> CouplingReport:
    """Compare trace and trace-of-square of the smoothed Gram of Gaussian noise
    with those of complex Wishart(d, 2m+1) draws via two-sample z-scores."""
    if 2 * m + 1 > n:
        raise ValueError("need 2m+1 <= n")
    if reps < 2:
        raise ValueError("need at least two replicates")
    if not (_circle_distance(r, 0, n) > m and _circle_distance(r, n / 2, n) > m):
        raise ValueError(f"frequency index r={r} lies within m={m} of 0 or n/2")
    summaries = np.empty((2, 2, reps))
    for k in range(reps):
        eta = innovation_block(task_seed(seed, 0, k), "gaussian", d, 0, n)
        G = smoothed_gram(eta, r, m)
        W = sample_wishart("complex", d, 2 * m + 1, task_seed(seed, 1, k)).matrix
        for arm, A in enumerate((G, W)):
            summaries[arm, 0, k] = np.trace(A).real
            summaries[arm, 1, k] = np.sum(np.abs(A) ** 2)
    z_tr = _two_sample_z(summaries[0, 0], summaries[1, 0])
    z_sq = _two_sample_z(summaries[0, 1], summaries[1, 1])
    return CouplingReport(
        n, d, m, r, int(seed), reps,
        float(summaries[0, 0].mean()), float(summaries[1, 0].mean()), z_tr,
        float(summaries[0, 1].mean()), float(summaries[1, 1].mean()), z_sq,
        bool(abs(z_tr) > Z_FLAG or abs(z_sq) > Z_FLAG),
    )


def numerical_rank(E: ArrayLike, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(E), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _special_columns(n: int, m: int, r: int) -> tuple[int, NDArray[np.int64]]:
    """Zero-based (unpaired column, conjugate-paired representatives) of the window at r."""
    if r == 0:
        # 1-based: real column 1, pairs represented by 2..m+1.
        return 0, np.arange(1, m + 1)
    if n % 2 == 0:
        # 1-based: real column n/2+1, pairs represented by n/2-m+1..n/2.
        return n // 2, np.arange(n // 2 - m, n // 2)
    # 1-based: unpaired complex column (n+1)/2-m, pairs represented by (n+1)/2-m+1..(n+1)/2.
    h = (n + 1) // 2
    return h - m - 1, np.arange(h - m, h)


def almost_wishart_residual(n: int, d: int, m: int, r: int, seed: int) -> tuple[NDArray, int]:
    """Residual ``E = eta V D_r V^* eta^T - Z Z^T`` at ``r in {0, floor(n/2)}``.

    ``Z = sqrt(2) [xi, Re P, Im P]`` where ``P`` holds one representative of
    each conjugate pair of DFT columns in the window and ``xi ~ N(0, Id/2)``
    comes from the auxiliary stream of ``seed``. The leftover column ``u``
    gives ``E = u u^* - 2 xi xi^T``, of rank at most 3.
    """
    if r not in (0, n // 2):
        raise ValueError(f"r must be 0 or floor(n/2)={n // 2}, got {r}")
    if 2 * m + 1 > n or m < 0:
        raise ValueError("need 0 <= m and 2m+1 <= n")
    eta = innovation_block(seed, "gaussian", d, 0, n)
    XV = dft_columns(eta)
    xi = innovation_block(seed, "gaussian", d, 0, 1, stream=AUXILIARY_STREAM)[:, 0] / math.sqrt(2.0)
    _, paired = _special_columns(n, m, r)
    P = XV[:, paired]
    Z = math.sqrt(2.0) * np.column_stack([xi, P.real, P.imag])
    E = smoothed_gram(eta, r, m) - Z @ Z.T
    E = 0.5 * (E + E.conj().T)
    if not np.iscomplexobj(E) or not np.any(E.imag):
        E = E.real
    return E, numerical_rank(E)
