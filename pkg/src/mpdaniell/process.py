"""Finite-order multivariate linear processes ``X_t = sum_k Psi_k eta_{t-k}``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._rng import INNOVATION_LAWS, innovation_block
from .measures import DiscreteMeasure, esd

__all__ = [
    "LinearProcessModel",
    "ModelAssumptions",
    "SimulationOutput",
    "transfer_function",
    "spectral_density",
    "population_esd",
    "simulate",
    "simulate_truncated",
    "simulate_circular",
    "check_assumptions",
    "make_rotating_ma",
    "white_noise",
    "opnorm",
]


def opnorm(A: ArrayLike) -> float:
    """Operator norm (largest singular value)."""
    return float(np.linalg.norm(np.asarray(A), 2))


@dataclass(frozen=True)
class LinearProcessModel:
    """MA(Q) model with real ``d x d`` coefficients ``coeffs[k] = Psi_k``."""

    coeffs: NDArray[np.float64]
    innovation_law: str = "gaussian"
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.ndim == 2:
            coeffs = coeffs[None]
        if coeffs.ndim != 3 or coeffs.shape[1] != coeffs.shape[2] or coeffs.shape[0] == 0:
            raise ValueError(f"coeffs must have shape (Q+1, d, d), got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        if self.innovation_law not in INNOVATION_LAWS:
            raise ValueError(f"unknown innovation law {self.innovation_law!r}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    @property
    def Q(self) -> int:
        return self.coeffs.shape[0] - 1

    def with_law(self, law: str) -> LinearProcessModel:
        return LinearProcessModel(self.coeffs, law, dict(self.metadata))

    def coeff_norms(self) -> NDArray[np.float64]:
        return np.array([opnorm(P) for P in self.coeffs])

    def to_dict(self) -> dict[str, Any]:
        return {
            "d": self.d,
            "Q": self.Q,
            "coeffs": self.coeffs.tolist(),
            "innovation_law": self.innovation_law,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> LinearProcessModel:
        model = cls(np.array(doc["coeffs"], dtype=np.float64), doc.get("innovation_law", "gaussian"),
                    dict(doc.get("metadata", {})))
        if "d" in doc and doc["d"] != model.d:
            raise ValueError(f"declared d={doc['d']} does not match coefficients (d={model.d})")
        if "Q" in doc and doc["Q"] != model.Q:
            raise ValueError(f"declared Q={doc['Q']} does not match coefficients (Q={model.Q})")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> LinearProcessModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ModelAssumptions:
    """Rate constants for the dimension/bandwidth schedule and coefficient decay."""

    alpha: float = 0.6
    gamma: float = 2.0
    K1: float = 2.0
    K2: float = 10.0
    c: float = 0.25

    def __post_init__(self) -> None:
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if min(self.K1, self.K2, self.c) <= 0:
            raise ValueError("K1, K2 and c must be positive")


@dataclass(frozen=True)
class SimulationOutput:
    """Data matrix ``[X_0..X_{n-1}]`` and the innovations that produced it.

    For the exact and truncated simulators ``innovations`` holds
    ``[eta_{-Q}, ..., eta_{n-1}]``; for the circular one ``[eta_0, ..., eta_{n-1}]``.
    """

    data: NDArray[np.float64]
    innovations: NDArray[np.float64]
    seed: int


def white_noise(d: int, innovation_law: str = "gaussian") -> LinearProcessModel:
    return LinearProcessModel(np.eye(d)[None], innovation_law, {"family": "white_noise"})


def transfer_function(model: LinearProcessModel, theta: float) -> NDArray[np.complex128]:
    """``G(theta) = sum_k exp(-i k theta) Psi_k``."""
    phases = np.exp(-1j * theta * np.arange(model.Q + 1))
    return np.tensordot(phases, model.coeffs, axes=1)


def spectral_density(model: LinearProcessModel, theta: float) -> NDArray[np.complex128]:
    G = transfer_function(model, theta)
    return G @ G.conj().T


def population_esd(model: LinearProcessModel, theta: float) -> DiscreteMeasure:
    return esd(spectral_density(model, theta))


def _innovations(model: LinearProcessModel, n: int, seed: int) -> NDArray[np.float64]:
    return innovation_block(seed, model.innovation_law, model.d, -model.Q, n)


def _filter(coeffs: NDArray[np.float64], eta: NDArray[np.float64], Q: int, n: int) -> NDArray[np.float64]:
    # eta[:, j] is eta_{j - Q}; column t of the result uses eta_{t-k} = eta[:, t - k + Q].
    X = coeffs[0] @ eta[:, Q:Q + n]
    for k in range(1, coeffs.shape[0]):
        X += coeffs[k] @ eta[:, Q - k:Q - k + n]
    return X


def simulate(model: LinearProcessModel, n: int, seed: int) -> SimulationOutput:
    if n < 1:
        raise ValueError("n must be positive")
    eta = _innovations(model, n, seed)
    return SimulationOutput(_filter(model.coeffs, eta, model.Q, n), eta, seed)


def simulate_truncated(model: LinearProcessModel, K: int, n: int, seed: int) -> SimulationOutput:
    """``X^(K)_t = sum_{k <= K} Psi_k eta_{t-k}`` on the innovation stream of :func:`simulate`."""
    if not 0 <= K <= model.Q:
        raise ValueError(f"truncation lag K={K} outside 0..{model.Q}")
    if n < 1:
        raise ValueError("n must be positive")
    eta = _innovations(model, n, seed)
    return SimulationOutput(_filter(model.coeffs[:K + 1], eta, model.Q, n), eta, seed)


def simulate_circular(model: LinearProcessModel, n: int, seed: int) -> SimulationOutput:
    """Columns ``sum_k Psi_k eta_{(t-k) mod n}`` built from the block ``[eta_0..eta_{n-1}]``."""
    if n <= model.Q:
        raise ValueError(f"circular simulation needs n > Q (n={n}, Q={model.Q})")
    eta = innovation_block(seed, model.innovation_law, model.d, 0, n)
    X = model.coeffs[0] @ eta
    for k in range(1, model.Q + 1):
        X += model.coeffs[k] @ np.roll(eta, k, axis=1)
    return SimulationOutput(X, eta, seed)


def check_assumptions(model: LinearProcessModel, assumptions: ModelAssumptions) -> dict[str, Any]:
    """Advisory check of the coefficient-decay conditions; never raises."""
    norms = model.coeff_norms()
    k = np.arange(model.Q + 1)
    lag_weighted = float(np.sum(k * norms))
    head = float(norms[0]) + lag_weighted
    # tails[K-1] = sum_{k >= K} |Psi_k| for K = 1..Q
    tails = np.cumsum(norms[::-1])[::-1][1:]
    Ks = np.arange(1, model.Q + 1)
    bounds = assumptions.K2 * Ks.astype(float) ** (-assumptions.gamma)
    tail_ok = tails <= bounds
    return {
        "d": model.d,
        "Q": model.Q,
        "coeff_norms": norms.tolist(),
        "lag_weighted_sum": lag_weighted,
        "head": head,
        "head_ok": bool(head <= assumptions.K2),
        "tail_sums": tails.tolist(),
        "tail_bounds": bounds.tolist(),
        "tail_ok": tail_ok.tolist(),
        "ok": bool(head <= assumptions.K2 and tail_ok.all()),
    }


def _haar_orthogonal(d: int, rng: np.random.Generator) -> NDArray[np.float64]:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_rotating_ma(d: int, Q: int, decay: float, seed: int,
                     innovation_law: str = "gaussian") -> LinearProcessModel:
    """MA(Q) with ``Psi_k = decay**k R_k D_k``: independent Haar rotations and
    diagonal scalings in [0.5, 1.5], so the coefficients share no eigenbasis."""
    if d < 2 or Q < 1 or not 0 < decay < 1:
        raise ValueError("need d >= 2, Q >= 1 and decay in (0, 1)")
    rng = np.random.default_rng(seed)
    coeffs = np.empty((Q + 1, d, d))
    for k in range(Q + 1):
        R = _haar_orthogonal(d, rng)
        D = rng.uniform(0.5, 1.5, size=d)
        coeffs[k] = decay**k * R * D
    meta = {"family": "rotating_ma", "decay": decay, "seed": int(seed)}
    return LinearProcessModel(coeffs, innovation_law, meta)
