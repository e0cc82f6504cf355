"""Gaussian Gram trace moments through Wick pairings.

For a centred Gaussian ``d x M`` matrix ``Y`` with column covariances
``Cov(Y[:, s], Y[:, s']) = A[s, s']`` the moment ``E tr((Y Y^T)^L)`` is a sum
over pairings of the ``2L`` factors. Factor ``a`` of the expanded trace is the
entry ``Y[j(a), s(a)]`` with edges

    e_a     = (j_a,           s_a)   for a = 1..L
    e_{L+a} = (j_{a mod L+1}, s_a)   for a = 1..L

so ``tau_c`` pairs ``q`` with ``q + L`` (shared s-index) and ``tau_r`` pairs
``q <= L`` with ``L + ((q - 2) mod L) + 1`` (shared j-index). Indices are
1-based throughout to match the pairing notation.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "Pairing",
    "CycleDecomposition",
    "BlockCovariance",
    "WickBudgetError",
    "MAX_PAIRING_SIZE",
    "WICK_BUDGET",
    "double_factorial",
    "enumerate_pairings",
    "cycle_decompose",
    "exact_trace_moment",
    "mc_trace_moment",
    "b_norm",
    "gershgorin_bound",
    "theorem2_bound",
    "random_factor_model",
]

MAX_PAIRING_SIZE = 12
WICK_BUDGET = 10**8


class WickBudgetError(ValueError):
    """Requested computation exceeds the elementary-operation budget."""


@dataclass(frozen=True)
class Pairing:
    """Perfect matching of ``{1..2L}``; pairs are stored as sorted tuples."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        pairs = tuple(sorted(tuple(sorted((int(a), int(b)))) for a, b in self.pairs))
        flat = [q for p in pairs for q in p]
        if sorted(flat) != list(range(1, 2 * len(pairs) + 1)):
            raise ValueError(f"not a pairing of 1..{2 * len(pairs)}: {self.pairs}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def L(self) -> int:
        return len(self.pairs)

    def partner(self) -> NDArray[np.int64]:
        """``partner()[q]`` is the index paired with ``q`` (entry 0 unused)."""
        out = np.zeros(2 * self.L + 1, dtype=np.int64)
        for a, b in self.pairs:
            out[a], out[b] = b, a
        return out


@dataclass(frozen=True)
class CycleDecomposition:
    row_cycles: tuple[tuple[int, ...], ...]
    column_cycles: tuple[tuple[int, ...], ...]

    @property
    def n_cycles(self) -> int:
        return len(self.row_cycles) + len(self.column_cycles)


def double_factorial(N: int) -> int:
    if N < 1 or N % 2 == 0:
        raise ValueError(f"double factorial defined here for odd N >= 1, got {N}")
    return math.prod(range(N, 0, -2))


def _pairings(items: list[int]) -> list[list[tuple[int, int]]]:
    if not items:
        return [[]]
    first, rest = items[0], items[1:]
    out = []
    for i, partner in enumerate(rest):
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            out.append([(first, partner)] + tail)
    return out


def enumerate_pairings(two_l: int) -> list[Pairing]:
    """All pairings of ``{1..two_l}`` in canonical recursive order."""
    if two_l < 2 or two_l % 2 or two_l > MAX_PAIRING_SIZE:
        raise ValueError(f"two_l must be even and in 2..{MAX_PAIRING_SIZE}, got {two_l}")
    return [Pairing(tuple(p)) for p in _pairings(list(range(1, two_l + 1)))]


def tau_row(L: int) -> NDArray[np.int64]:
    out = np.zeros(2 * L + 1, dtype=np.int64)
    for q in range(1, L + 1):
        qb = L + (q - 2) % L + 1
        out[q], out[qb] = qb, q
    return out


def tau_column(L: int) -> NDArray[np.int64]:
    out = np.zeros(2 * L + 1, dtype=np.int64)
    for q in range(1, L + 1):
        out[q], out[q + L] = q + L, q
    return out


def _orbits(L: int, *involutions: NDArray[np.int64]) -> tuple[tuple[int, ...], ...]:
    seen = np.zeros(2 * L + 1, dtype=bool)
    orbits = []
    for start in range(1, 2 * L + 1):
        if seen[start]:
            continue
        stack, orbit = [start], []
        seen[start] = True
        while stack:
            q = stack.pop()
            orbit.append(q)
            for inv in involutions:
                nxt = int(inv[q])
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        orbits.append(tuple(sorted(orbit)))
    return tuple(orbits)


def cycle_decompose(p: Pairing, L: int | None = None) -> CycleDecomposition:
    L = p.L if L is None else L
    if p.L != L:
        raise ValueError(f"pairing has {p.L} pairs, expected L={L}")
    pi = p.partner()
    return CycleDecomposition(_orbits(L, pi, tau_row(L)), _orbits(L, pi, tau_column(L)))


def _row_chains(p: Pairing) -> list[list[tuple[int, int]]]:
    """Each row cycle as an ordered list of factors ``(q, pi(q))``.

    The j-sum over a row cycle is ``tr(prod A[s(q), s(pi(q))])`` along the
    chain ``q0 -pi-> q1 -tau_r-> q2 -pi-> q3 ...``.
    """
    L = p.L
    pi, tr = p.partner(), tau_row(L)
    seen = np.zeros(2 * L + 1, dtype=bool)
    chains = []
    for start in range(1, 2 * L + 1):
        if seen[start]:
            continue
        chain, q = [], start
        while True:
            q1 = int(pi[q])
            seen[q] = seen[q1] = True
            chain.append((q, q1))
            q = int(tr[q1])
            if q == start:
                break
        chains.append(chain)
    return chains


@dataclass(frozen=True)
class BlockCovariance:
    """Column covariance blocks ``blocks[s, s'] = A_{s,s'}`` (shape ``(M, M, d, d)``).

    ``factors`` (shape ``(U, d, d)``), when present, define the moving-average
    model ``Y[:, s] = sum_u C_u eps_{s-u}`` whose covariance is ``blocks``.
    """

    blocks: NDArray[np.float64]
    factors: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        blocks = np.array(self.blocks, dtype=np.float64)
        if blocks.ndim != 4 or blocks.shape[0] != blocks.shape[1] or blocks.shape[2] != blocks.shape[3]:
            raise ValueError(f"blocks must have shape (M, M, d, d), got {blocks.shape}")
        if not np.all(np.isfinite(blocks)):
            raise ValueError("blocks must be finite")
        scale = max(1.0, float(np.abs(blocks).max()))
        if np.abs(blocks - blocks.transpose(1, 0, 3, 2)).max() > 1e-12 * scale:
            raise ValueError("blocks violate A[s, s'] = A[s', s]^T")
        blocks.flags.writeable = False
        object.__setattr__(self, "blocks", blocks)
        if self.factors is not None:
            factors = np.array(self.factors, dtype=np.float64)
            if factors.ndim != 3 or factors.shape[1:] != blocks.shape[2:]:
                raise ValueError("factors must have shape (U, d, d) matching the blocks")
            implied = _blocks_from_factors(factors, blocks.shape[0])
            if np.abs(implied - blocks).max() > 1e-12 * scale:
                raise ValueError("blocks do not match the factor model")
            factors.flags.writeable = False
            object.__setattr__(self, "factors", factors)

    @property
    def M(self) -> int:
        return self.blocks.shape[0]

    @property
    def d(self) -> int:
        return self.blocks.shape[2]

    @classmethod
    def from_factors(cls, factors: ArrayLike, M: int) -> BlockCovariance:
        factors = np.asarray(factors, dtype=np.float64)
        return cls(_blocks_from_factors(factors, M), factors)

    @classmethod
    def iid(cls, d: int, M: int) -> BlockCovariance:
        return cls.from_factors(np.eye(d)[None], M)

    def to_dict(self) -> dict[str, Any]:
        if self.factors is not None:
            return {"M": self.M, "d": self.d, "factors": self.factors.tolist()}
        return {"M": self.M, "d": self.d, "blocks": self.blocks.tolist()}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> BlockCovariance:
        if "factors" in doc:
            cov = cls.from_factors(doc["factors"], int(doc["M"]))
        else:
            cov = cls(np.array(doc["blocks"], dtype=np.float64))
        if cov.M != doc.get("M", cov.M) or cov.d != doc.get("d", cov.d):
            raise ValueError("declared M or d does not match the data")
        return cov

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> BlockCovariance:
        return cls.from_dict(json.loads(Path(path).read_text()))


def _blocks_from_factors(factors: NDArray[np.float64], M: int) -> NDArray[np.float64]:
    if M < 1:
        raise ValueError("M must be positive")
    U, d = factors.shape[0], factors.shape[1]
    blocks = np.zeros((M, M, d, d))
    for s in range(M):
        for sp in range(M):
            lag = sp - s
            for u in range(max(0, -lag), min(U, U - lag)):
                blocks[s, sp] += factors[u] @ factors[u + lag].T
    return blocks


def random_factor_model(d: int, M: int, U: int, rng: np.random.Generator,
                        scale: float = 1.0) -> BlockCovariance:
    """Factor model with i.i.d. ``N(0, scale^2 / d)`` entries in ``U`` factors."""
    factors = rng.normal(scale=scale / math.sqrt(d), size=(U, d, d))
    return BlockCovariance.from_factors(factors, M)


def _wick_cost(L: int, M: int, d: int) -> int:
    return double_factorial(2 * L - 1) * M**L * d**3


def exact_trace_moment(cov: BlockCovariance, L: int, budget: int = WICK_BUDGET) -> float:
    """Exact ``E tr((Y Y^T)^L)``: sum over pairings and s-assignments of row-cycle traces."""
    if L < 1:
        raise ValueError("L must be positive")
    M, d = cov.M, cov.d
    cost = _wick_cost(L, M, d)
    if cost > budget:
        raise WickBudgetError(f"(2L-1)!! M^L d^3 = {cost} exceeds budget {budget}")
    # s-assignments: column a-1 holds s_a; s(q) = s_{((q-1) mod L) + 1}.
    S = np.array(list(itertools.product(range(M), repeat=L)), dtype=np.int64).reshape(-1, L)
    s_of = lambda q: S[:, (q - 1) % L]  # noqa: E731
    A = cov.blocks
    total = 0.0
    for p in enumerate_pairings(2 * L):
        term = np.ones(S.shape[0])
        for chain in _row_chains(p):
            prod = None
            for q, q1 in chain:
                factor = A[s_of(q), s_of(q1)]
                prod = factor if prod is None else prod @ factor
            term *= np.trace(prod, axis1=1, axis2=2)
        total += float(term.sum())
    return total


def mc_trace_moment(cov: BlockCovariance, L: int, samples: int, seed: int,
                    chunk: int = 20000) -> tuple[float, float]:
    """Monte-Carlo ``E tr((Y Y^T)^L)`` from the factor model; returns (mean, stderr)."""
    if cov.factors is None:
        raise ValueError("Monte Carlo needs a factor model (BlockCovariance.from_factors)")
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    if L < 1:
        raise ValueError("L must be positive")
    C, M, d = cov.factors, cov.M, cov.d
    U = C.shape[0]
    rng = np.random.default_rng(seed)
    values = np.empty(samples)
    for lo in range(0, samples, chunk):
        k = min(chunk, samples - lo)
        # eps[:, :, t] is eps_{t - (U - 1)}, so eps_{s-u} sits at column s - u + U - 1.
        eps = rng.standard_normal((k, d, M + U - 1))
        Y = np.zeros((k, d, M))
        for u in range(U):
            Y += np.einsum("ij,kjs->kis", C[u], eps[:, :, U - 1 - u:U - 1 - u + M])
        W = Y @ Y.transpose(0, 2, 1)
        values[lo:lo + k] = np.trace(np.linalg.matrix_power(W, L), axis1=1, axis2=2)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def _b_matrix(cov: BlockCovariance) -> NDArray[np.float64]:
    return np.linalg.norm(cov.blocks, ord=2, axis=(2, 3))


def b_norm(cov: BlockCovariance) -> float:
    """Operator norm of ``B[s, s'] = |A_{s,s'}|`` (spectral norms of the blocks)."""
    return float(np.linalg.norm(_b_matrix(cov), 2))


def gershgorin_bound(cov: BlockCovariance) -> float:
    """Row-sum bound ``max_s sum_s' |A_{s,s'}|`` on :func:`b_norm`."""
    return float(_b_matrix(cov).sum(axis=1).max())


def theorem2_bound(kappa: float, L: int, d: int, M: int) -> float:
    """``kappa^L (2L-1)!! (d+M)^(L+1)``."""
    if kappa < 0 or L < 1 or d < 1 or M < 1:
        raise ValueError("need kappa >= 0 and positive L, d, M")
    return float(kappa**L * double_factorial(2 * L - 1) * float(d + M) ** (L + 1))
