"""Marchenko-Pastur fixed-point equation.

For a population law ``H`` and aspect ratio ``c`` the Stieltjes transform of
the limiting law solves

    m = sum_j h_j / (lambda_j (1 - c - c z m) - z),      Im z > 0.

:func:`mp_solve` runs damped fixed-point iteration from ``m0 = -1/z``. Points
close to the real axis are reached by continuation in ``Im z`` and finished
with safeguarded Newton steps; every returned value satisfies the residual
tolerance (relative to ``max(1, |m|)``) and lies in the upper half-plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import cumulative_trapezoid

from .measures import DiscreteMeasure
from .process import LinearProcessModel, population_esd
from .spectral import grid_index

__all__ = [
    "MPSolution",
    "NonConvergenceError",
    "mp_solve",
    "mp_solve_diagnostics",
    "mp_density",
    "nu_n",
    "discretize",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
DEFAULT_ETA = 1e-3
MIN_ETA = 1e-4
# Density work needs far fewer digits than mp_solve, and near an atom at zero
# (c > 1, |m| ~ 1/eta) the equation cannot be evaluated to 1e-12.
DENSITY_TOL = 1e-9
OMEGA_FLOOR = 1.0 / 64
# Continuation starts here; fixed-point iteration converges fast at this height.
_CONTINUATION_TOP = 2.0
_CONTINUATION_RATIO = 0.35
_NEWTON_STEPS = 60
_CHUNK = 1 << 20


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class MPSolution:
    """Solver handle: population law ``H``, aspect ratio ``c`` and tolerances."""

    H: DiscreteMeasure
    c: float
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError("aspect ratio c must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        object.__setattr__(self, "H", self.H.merged())

    def __call__(self, z: complex) -> complex:
        return mp_solve(self, z)


@dataclass(frozen=True)
class SolveInfo:
    m: NDArray[np.complex128]
    iterations: NDArray[np.int64]
    residual: NDArray[np.float64]


def _rhs(sol: MPSolution, z: NDArray, m: NDArray, with_derivative: bool = False):
    lam, w, c = sol.H.atoms, sol.H.weights, sol.c
    rows = max(1, _CHUNK // max(lam.size, 1))
    out = np.empty_like(m)
    der = np.empty_like(m) if with_derivative else None
    for lo in range(0, m.size, rows):
        zz, mm = z[lo:lo + rows, None], m[lo:lo + rows, None]
        inv = 1.0 / (lam * (1.0 - c - c * zz * mm) - zz)
        out[lo:lo + rows] = inv @ w
        if with_derivative:
            der[lo:lo + rows] = (inv * inv) @ (w * lam) * (c * zz[:, 0])
    return (out, der) if with_derivative else out


def _residual(sol: MPSolution, z: NDArray, m: NDArray) -> NDArray:
    """Scaled residual ``|m - RHS(m)| / max(1, |m|)``."""
    return np.abs(_rhs(sol, z, m) - m) / np.maximum(1.0, np.abs(m))


def _step(sol: MPSolution, z: NDArray, m: NDArray) -> NDArray:
    """One fixed-point step written through ``u = c m - (1 - c) / z``.

    The map ``u -> -1 / (z - c * sum_j h_j lambda_j / (1 + lambda_j u))`` keeps
    ``u`` in the upper half-plane for every ``c``; iterating the right-hand
    side in ``m`` directly does not once ``c > 1``. Fixed points coincide.
    """
    lam, w, c = sol.H.atoms, sol.H.weights, sol.c
    rows = max(1, _CHUNK // max(lam.size, 1))
    out = np.empty_like(m)
    for lo in range(0, m.size, rows):
        zz = z[lo:lo + rows]
        u = c * m[lo:lo + rows] - (1.0 - c) / zz
        u_next = -1.0 / (zz - c * ((lam / (1.0 + lam * u[:, None])) @ w))
        out[lo:lo + rows] = (u_next + (1.0 - c) / zz) / c
    return out


def _fixed_point(sol, z, m, iters, todo, budget):
    """Damped iteration m <- (1-w) m + w T(m) on the points flagged in ``todo``."""
    idx = np.flatnonzero(todo)
    omega = np.ones(idx.size)
    mm, zz = m[idx], z[idx]
    res = _residual(sol, zz, mm)
    for _ in range(budget):
        active = res > sol.tol
        if not active.any():
            break
        a = np.flatnonzero(active)
        cand = (1 - omega[a]) * mm[a] + omega[a] * _step(sol, zz[a], mm[a])
        new_res = _residual(sol, zz[a], cand)
        worse = new_res > res[a]
        omega[a[worse]] = np.maximum(omega[a[worse]] / 2, OMEGA_FLOOR)
        mm[a], res[a] = cand, new_res
        iters[idx[a]] += 1
    m[idx] = mm
    return res


def _newton(sol, z, m, iters):
    """Safeguarded Newton on F(m) = m - RHS(m); returns residuals."""
    res = _residual(sol, z, m)
    for _ in range(_NEWTON_STEPS):
        a = np.flatnonzero(res > sol.tol)
        if a.size == 0:
            break
        rhs, der = _rhs(sol, z[a], m[a], with_derivative=True)
        step = (rhs - m[a]) / (1.0 - der)
        t = np.ones(a.size)
        accepted = np.zeros(a.size, dtype=bool)
        best_m, best_res = m[a].copy(), res[a].copy()
        for _ in range(12):
            pending = np.flatnonzero(~accepted)
            if pending.size == 0:
                break
            cand = m[a[pending]] + t[pending] * step[pending]
            ok = np.isfinite(cand) & (cand.imag > 0)
            cres = np.full(pending.size, np.inf)
            if ok.any():
                good = pending[ok]
                cres[ok] = _residual(sol, z[a[good]], cand[ok])
            improve = cres < best_res[pending]
            best_m[pending[improve]] = cand[improve]
            best_res[pending[improve]] = cres[improve]
            accepted[pending[improve]] = True
            t[pending[~improve]] /= 2
        stalled = ~accepted
        m[a], res[a] = best_m, best_res
        iters[a] += 1
        if stalled.all():
            break
    return res


def _solve_points(sol: MPSolution, z: NDArray[np.complex128], m0: NDArray | None = None) -> SolveInfo:
    z = np.asarray(z, dtype=np.complex128).ravel()
    if np.any(z.imag <= 0):
        raise ValueError("the Marchenko-Pastur equation is posed for Im(z) > 0")
    iters = np.zeros(z.size, dtype=np.int64)
    if m0 is None:
        m = -1.0 / z
        # Continuation in Im z for points below the top level.
        low = z.imag < _CONTINUATION_TOP
        if low.any():
            zl = z[low]
            levels = []
            h = _CONTINUATION_TOP
            while h > zl.imag.min():
                levels.append(h)
                h *= _CONTINUATION_RATIO
            ml = -1.0 / (zl.real + 1j * _CONTINUATION_TOP)
            il = np.zeros(zl.size, dtype=np.int64)
            for k, h in enumerate(levels):
                zh = zl.real + 1j * np.maximum(zl.imag, h)
                if k == 0:
                    _fixed_point(sol, zh, ml, il, np.ones(zl.size, dtype=bool), 200)
                _newton(sol, zh, ml, il)
            m[low] = ml
            iters[low] += il
    else:
        m = np.array(m0, dtype=np.complex128).ravel().copy()
    res = _fixed_point(sol, z, m, iters, np.ones(z.size, dtype=bool), 50)
    bad = res > sol.tol
    if bad.any():
        mb, ib = m[bad], iters[bad]
        res_b = _newton(sol, z[bad], mb, ib)
        m[bad], iters[bad], res[bad] = mb, ib, res_b
    bad = (res > sol.tol) | ~(m.imag > 0)
    if bad.any():
        # Plain damped iteration from the classical start as the last resort.
        mb = -1.0 / z[bad]
        ib = iters[bad]
        res_b = _fixed_point(sol, z[bad], mb, ib, np.ones(mb.size, dtype=bool), sol.max_iter)
        m[bad], iters[bad], res[bad] = mb, ib, res_b
    return SolveInfo(m, iters, res)


def mp_solve_diagnostics(sol: MPSolution, z: complex | ArrayLike) -> SolveInfo:
    """Solve at one or many ``z`` without raising; inspect ``residual`` yourself."""
    return _solve_points(sol, np.atleast_1d(np.asarray(z, dtype=np.complex128)))


def mp_solve(sol: MPSolution, z: complex | ArrayLike) -> complex | NDArray[np.complex128]:
    """Stieltjes transform of the limiting law at ``z`` (scalar or array)."""
    z_arr = np.asarray(z, dtype=np.complex128)
    info = _solve_points(sol, np.atleast_1d(z_arr))
    failed = (info.residual > sol.tol) | ~(info.m.imag > 0)
    if failed.any():
        worst = float(np.max(np.where(np.isfinite(info.residual), info.residual, np.inf)))
        raise NonConvergenceError(
            f"Marchenko-Pastur solver did not converge at {int(failed.sum())} point(s); "
            f"worst residual {worst:.3g}", worst)
    if z_arr.ndim == 0:
        return complex(info.m[0])
    return info.m.reshape(z_arr.shape)


def _density_handle(sol: MPSolution) -> MPSolution:
    return replace(sol, tol=max(sol.tol, DENSITY_TOL))


def mp_density(sol: MPSolution, xs: ArrayLike, eta: float = DEFAULT_ETA) -> NDArray[np.float64]:
    """Density of the limiting law smoothed at height ``eta``: ``Im m(x + i eta) / pi``.

    Solves to ``max(sol.tol, DENSITY_TOL)``.
    """
    if eta < MIN_ETA:
        raise ValueError(f"eta must be at least {MIN_ETA}")
    sol = _density_handle(sol)
    xs = np.asarray(xs, dtype=np.float64)
    m = mp_solve(sol, xs + 1j * eta)
    return np.maximum(np.imag(m), 0.0) / np.pi


def _density_warm(sol: MPSolution, xs: NDArray, eta: float, x0: NDArray, m0: NDArray) -> NDArray:
    """Density on ``xs`` warm-started from solutions ``m0`` known on ``x0``."""
    z = xs + 1j * eta
    start = np.interp(xs, x0, m0.real) + 1j * np.interp(xs, x0, m0.imag)
    info = _solve_points(sol, z, start)
    bad = (info.residual > sol.tol) | ~(info.m.imag > 0)
    if bad.any():
        info.m[bad] = mp_solve(sol, z[bad])
    return np.maximum(info.m.imag, 0.0) / np.pi


def nu_n(model: LinearProcessModel, theta: float, d: int, m: int, n: int | None = None) -> MPSolution:
    """Finite-n limiting law: ``H = ESD of F([theta]_n)`` and ``c = d / (2m + 1)``.

    Without ``n`` the frequency is used as given.
    """
    if d < 1 or m < 1:
        raise ValueError("d and m must be positive")
    if d != model.d:
        raise ValueError(f"model dimension {model.d} does not match d={d}")
    if n is not None:
        theta = grid_index(theta, n).theta_snapped
    return MPSolution(population_esd(model, theta), d / (2 * m + 1))


def support_bounds(sol: MPSolution) -> tuple[float, float]:
    """Interval containing the support of the limiting law (crude outer bounds)."""
    top = max(float(sol.H.atoms.max()), 0.0) * (1.0 + math.sqrt(sol.c)) ** 2
    return 0.0, top


def discretize(sol: MPSolution, n_atoms: int = 512, eta: float = DEFAULT_ETA) -> DiscreteMeasure:
    """Quantile discretization of the limiting law.

    The density is recovered by Stieltjes inversion on an adaptive grid; its
    normalized CDF is inverted at ``(k - 1/2) / n_atoms``. For ``c > 1`` the
    point mass ``1 - 1/c`` at zero is split off explicitly.
    """
    if eta < MIN_ETA:
        raise ValueError(f"eta must be at least {MIN_ETA}")
    sol = _density_handle(sol)
    lo, hi = support_bounds(sol)
    if hi <= 0:
        return DiscreteMeasure.point_mass(0.0)
    pad = 0.05 * hi + 20 * eta
    coarse = np.linspace(lo - pad, hi + pad, 1025)
    m_coarse = mp_solve(sol, coarse + 1j * eta)
    dens = np.maximum(m_coarse.imag, 0.0) / np.pi
    zero_mass = max(0.0, 1.0 - 1.0 / sol.c)
    if zero_mass > 0:
        dens = dens - zero_mass * eta / (np.pi * (coarse**2 + eta**2))
    live = dens > 1e-6 * dens.max()
    step = coarse[1] - coarse[0]
    spacing = min(step, max(eta, (hi - lo) / 8192))
    pieces = []
    for i in np.flatnonzero(live):
        pieces.append(np.arange(coarse[max(i - 1, 0)], coarse[min(i + 1, coarse.size - 1)], spacing))
    fine = np.unique(np.concatenate(pieces + [coarse]))
    dens = _density_warm(sol, fine, eta, coarse, m_coarse)
    if zero_mass > 0:
        dens = np.maximum(dens - zero_mass * eta / (np.pi * (fine**2 + eta**2)), 0.0)
    cdf = cumulative_trapezoid(dens, fine, initial=0.0)
    cdf /= cdf[-1]
    levels = (np.arange(n_atoms) + 0.5) / n_atoms
    # Plateaus in the CDF make np.interp ill-posed; keep the strictly increasing part.
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    atoms = np.interp(levels, cdf[keep], fine[keep])
    weights = np.full(n_atoms, (1.0 - zero_mass) / n_atoms)
    if zero_mass > 0:
        atoms = np.concatenate([[0.0], atoms])
        weights = np.concatenate([[zero_mass], weights])
        weights /= weights.sum()
    return DiscreteMeasure(atoms, weights)
