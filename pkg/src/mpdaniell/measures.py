"""Discrete probability measures on the real line.

Empirical spectral distributions, Stieltjes transforms, the exact bounded
Lipschitz distance and Stieltjes inversion.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "DiscreteMeasure",
    "StieltjesPoint",
    "esd",
    "stieltjes",
    "bl_distance",
    "density_from_stieltjes",
]

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely supported probability measure with ascending atoms."""

    atoms: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        atoms = np.array(self.atoms, dtype=np.float64).ravel()
        weights = np.array(self.weights, dtype=np.float64).ravel()
        if atoms.shape != weights.shape:
            raise ValueError("atoms and weights must have the same length")
        if atoms.size == 0:
            raise ValueError("a probability measure needs at least one atom")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise ValueError("atoms and weights must be finite")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        atoms.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, x: float) -> DiscreteMeasure:
        return cls(np.array([x]), np.array([1.0]))

    @classmethod
    def uniform(cls, atoms: ArrayLike) -> DiscreteMeasure:
        atoms = np.asarray(atoms, dtype=np.float64).ravel()
        return cls(atoms, np.full(atoms.size, 1.0 / atoms.size))

    def __len__(self) -> int:
        return self.atoms.size

    def merged(self) -> DiscreteMeasure:
        """Same measure with coincident atoms combined."""
        atoms, inverse = np.unique(self.atoms, return_inverse=True)
        weights = np.bincount(inverse, weights=self.weights)
        return DiscreteMeasure(atoms, weights)

    def mean(self) -> float:
        return float(np.dot(self.atoms, self.weights))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["atom", "weight"])
            for a, w in zip(self.atoms, self.weights):
                writer.writerow([f"{a:.17g}", f"{w:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path) -> DiscreteMeasure:
        """Read a two-column (atom, weight) CSV; a header row is optional."""
        atoms, weights = [], []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or not "".join(row).strip():
                    continue
                try:
                    a, w = float(row[0]), float(row[1])
                except ValueError:
                    if i == 0:
                        continue
                    raise
                atoms.append(a)
                weights.append(w)
        return cls(np.array(atoms), np.array(weights))


@dataclass(frozen=True)
class StieltjesPoint:
    z: complex
    m: complex

    def __post_init__(self) -> None:
        if not self.z.imag > 0:
            raise ValueError("z must lie in the upper half-plane")
        if not self.m.imag > 0:
            raise ValueError("a Stieltjes transform takes values in the upper half-plane")
        if abs(self.m) > 1.0 / self.z.imag * (1 + 1e-12):
            raise ValueError("|m| exceeds 1/Im(z)")


def esd(A: ArrayLike, tol: float = 1e-8) -> DiscreteMeasure:
    """Empirical spectral distribution: uniform weight on the eigenvalues of ``A``.

    ``A`` must be Hermitian up to ``tol`` relative (Frobenius norm); it is
    symmetrized before the eigendecomposition.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    scale = np.linalg.norm(A)
    asym = np.linalg.norm(A - A.conj().T)
    if asym > tol * scale:
        raise ValueError(f"matrix is not Hermitian: |A - A*| = {asym:.3g}, |A| = {scale:.3g}")
    sym = 0.5 * (A + A.conj().T)
    lam = np.linalg.eigvalsh(sym)
    d = lam.size
    return DiscreteMeasure(lam, np.full(d, 1.0 / d))


def stieltjes(mu: DiscreteMeasure, z: complex | ArrayLike) -> complex | NDArray[np.complex128]:
    """Stieltjes transform ``sum_j w_j / (lambda_j - z)``; ``z`` may be an array."""
    z_arr = np.asarray(z, dtype=np.complex128)
    if np.any(z_arr.imag <= 0):
        raise ValueError("Stieltjes transform is only defined for Im(z) > 0")
    m = (mu.weights / (mu.atoms - z_arr[..., None])).sum(axis=-1)
    return complex(m) if m.ndim == 0 else m


def _signed_masses(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> tuple[NDArray, NDArray]:
    grid = np.unique(np.concatenate([mu1.atoms, mu2.atoms]))
    # Separate histograms keep c exactly antisymmetric under swapping the measures.
    p1 = np.bincount(np.searchsorted(grid, mu1.atoms), weights=mu1.weights, minlength=grid.size)
    p2 = np.bincount(np.searchsorted(grid, mu2.atoms), weights=mu2.weights, minlength=grid.size)
    return grid, p1 - p2


def _chain_lp_max(x: NDArray[np.float64], c: NDArray[np.float64]) -> float:
    """max sum_i c_i f_i subject to |f_i| <= 1 and |f_{i+1} - f_i| <= x_{i+1} - x_i.

    Dynamic programming over the chain. The value function of the prefix
    problem, as a function of the last coordinate, is concave and piecewise
    linear; it is carried as breakpoints ``xs`` with values ``vals`` on [-1, 1].
    Taking the max over a window of half-width ``gap`` moves the increasing
    part left by ``gap``, the decreasing part right by ``gap`` and inserts a
    flat piece at the maximizer.
    """
    xs = np.array([-1.0, 1.0])
    vals = c[0] * xs
    for gap, ci in zip(np.diff(x), c[1:]):
        j = int(np.argmax(vals))
        xs = np.concatenate([xs[: j + 1] - gap, xs[j:] + gap])
        vals = np.concatenate([vals[: j + 1], vals[j:]])
        lo, hi = np.interp([-1.0, 1.0], xs, vals)
        inside = (xs > -1.0) & (xs < 1.0)
        xs = np.concatenate([[-1.0], xs[inside], [1.0]])
        vals = np.concatenate([[lo], vals[inside], [hi]]) + ci * xs
    return float(vals.max())


def bl_distance(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> float:
    """Exact bounded Lipschitz distance between two discrete measures.

    On the merged sorted atom set the supremum over 1-bounded 1-Lipschitz test
    functions is the chain linear program with adjacent Lipschitz constraints;
    piecewise-linear interpolation of an optimal vertex is a valid test function.
    """
    x, c = _signed_masses(mu1, mu2)
    if not np.any(c):
        return 0.0
    # The optimum is invariant under f -> -f; evaluating both signs makes the
    # result exactly symmetric in floating point.
    value = max(_chain_lp_max(x, c), _chain_lp_max(x, -c))
    return float(np.clip(value, 0.0, 2.0))


def density_from_stieltjes(m_eval: Callable[[complex], complex], x: float, eta: float) -> float:
    """Stieltjes inversion at height ``eta``: ``Im m(x + i eta) / pi``."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    return float(np.imag(m_eval(complex(x, eta)))) / np.pi
