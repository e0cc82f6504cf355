"""Configuration-driven experiments behind the command-line interface.

Every experiment is split into independent tasks. Tasks are evaluated either
in-process or on a process pool and merged in canonical order, so the output
does not depend on the number of workers.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from ._rng import INNOVATION_LAWS, task_seed
from .measures import DiscreteMeasure, bl_distance, esd
from .mpsolver import MPSolution, discretize, mp_density, mp_solve_diagnostics, nu_n
from .process import (LinearProcessModel, ModelAssumptions, check_assumptions, make_rotating_ma,
                      simulate, white_noise)
from .spectral import approx_s_prime, approx_s_tilde, daniell_matrix, grid_index
from .wick import (WickBudgetError, b_norm, exact_trace_moment, gershgorin_bound, mc_trace_moment,
                   random_factor_model, theorem2_bound)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ScheduleRow",
    "schedule",
    "build_model",
    "run_theorem1",
    "run_prop1",
    "run_wick",
    "emit_density",
    "run_mp_solve",
    "check_model",
    "fmt",
]

MODEL_TYPES = ("white_noise", "rotating_ma", "file", "inline")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def fmt(x: Any) -> str:
    """Render a CSV cell; floats use 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


@dataclass(frozen=True)
class ScheduleRow:
    n: int
    m: int
    d: int

    @property
    def c_n(self) -> float:
        return self.d / (2 * self.m + 1)


def schedule(n: int, alpha: float, c_target: float) -> ScheduleRow:
    """``m = round(n^alpha)``, ``d = round(c_target (2m+1))`` with half-up rounding."""
    m = math.floor(n**alpha + 0.5)
    d = math.floor(c_target * (2 * m + 1) + 0.5)
    if m < 1 or 2 * m + 1 > n:
        raise ConfigError(f"schedule invalid at n={n}: m={m} needs 1 <= m and 2m+1 <= n")
    if d < 2:
        raise ConfigError(f"schedule invalid at n={n}: d={d} < 2")
    return ScheduleRow(n, m, d)


@dataclass(frozen=True)
class WickSettings:
    instances: int = 100
    d_max: int = 3
    M_max: int = 3
    L_max: int = 3
    factors: int = 2
    samples: int = 100_000

    def __post_init__(self) -> None:
        if self.instances < 0 or min(self.d_max, self.M_max, self.L_max, self.factors) < 1:
            raise ConfigError("wick settings must be positive")
        if self.samples and self.samples < 1000:
            raise ConfigError("wick samples must be 0 (skip Monte Carlo) or at least 1000")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed JSON configuration; see ``configs/`` for examples."""

    model: dict[str, Any] = field(default_factory=lambda: {"type": "white_noise"})
    n_list: tuple[int, ...] = (4096,)
    alpha: float = 0.6
    c_target: float = 0.25
    theta_list: tuple[float, ...] = (1.0,)
    seeds: tuple[int, ...] = (0,)
    replicates: int = 1
    innovation_law: str = "gaussian"
    output_dir: str | None = None
    threads: int = 1
    timing: bool = False
    bins: int = 200
    mp: dict[str, Any] = field(default_factory=dict)
    wick: WickSettings = field(default_factory=WickSettings)

    def __post_init__(self) -> None:
        if self.model.get("type") not in MODEL_TYPES:
            raise ConfigError(f"model.type must be one of {MODEL_TYPES}, got {self.model.get('type')!r}")
        if self.innovation_law not in INNOVATION_LAWS:
            raise ConfigError(f"innovation_law must be one of {INNOVATION_LAWS}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if not self.c_target > 0:
            raise ConfigError("c_target must be positive")
        if self.replicates < 0 or self.threads < 1 or self.bins < 1:
            raise ConfigError("replicates must be >= 0, threads and bins >= 1")
        if any(not 0 <= t < 2 * math.pi for t in self.theta_list):
            raise ConfigError("frequencies must lie in [0, 2 pi)")
        if any(s < 0 or s >= 2**64 for s in self.seeds):
            raise ConfigError("seeds must be unsigned 64-bit integers")
        if any(n < 1 for n in self.n_list):
            raise ConfigError("sample sizes must be positive")

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(doc)
        for key in ("n_list", "theta_list", "seeds"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "wick" in kw:
            try:
                kw["wick"] = WickSettings(**kw["wick"])
            except TypeError as exc:
                raise ConfigError(f"bad wick settings: {exc}") from exc
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def schedules(self) -> list[ScheduleRow]:
        return [schedule(n, self.alpha, self.c_target) for n in self.n_list]


def build_model(spec: dict[str, Any], d: int, law: str) -> LinearProcessModel:
    """Model of dimension ``d`` from a config model spec."""
    kind = spec["type"]
    if kind == "white_noise":
        return white_noise(d, law)
    if kind == "rotating_ma":
        return make_rotating_ma(d, int(spec.get("Q", 2)), float(spec.get("decay", 0.5)),
                                int(spec.get("seed", 0)), law)
    if kind == "file":
        model = LinearProcessModel.load(spec["path"]).with_law(law)
    else:
        model = LinearProcessModel.from_dict(spec).with_law(law)
    if model.d != d:
        raise ConfigError(f"model has d={model.d} but the schedule asks for d={d}")
    return model


def _map(fn: Callable, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


# ------------------------------------------------------------- limit-law sweeps

THEOREM1_COLUMNS = ["n", "d", "m", "theta", "r", "innovation_law", "seed", "dbl", "error"]
PROP1_COLUMNS = ["n", "d", "m", "theta", "r", "innovation_law", "seed",
                 "dbl_s_sprime", "dbl_s_stilde", "dbl_stilde_sprime", "error"]


@dataclass(frozen=True)
class _Task:
    cfg: ExperimentConfig
    sched: ScheduleRow
    theta_index: int


def _task_seeds(cfg: ExperimentConfig, n: int, ti: int) -> list[int]:
    return [task_seed(master, n, ti, rep) for master in cfg.seeds for rep in range(cfg.replicates)]


def _tasks(cfg: ExperimentConfig) -> list[_Task]:
    return [_Task(cfg, s, ti) for s in cfg.schedules() for ti in range(len(cfg.theta_list))]


def _row_head(cfg: ExperimentConfig, s: ScheduleRow, theta: float, seed: int) -> dict[str, Any]:
    return {"n": s.n, "d": s.d, "m": s.m, "theta": theta, "r": grid_index(theta, s.n).r,
            "innovation_law": cfg.innovation_law, "seed": seed}


def _theorem1_task(task: _Task) -> list[dict[str, Any]]:
    cfg, s = task.cfg, task.sched
    theta = cfg.theta_list[task.theta_index]
    seeds = _task_seeds(cfg, s.n, task.theta_index)
    rows = []
    limit: DiscreteMeasure | None = None
    limit_error = ""
    if seeds:
        try:
            model = build_model(cfg.model, s.d, cfg.innovation_law)
            limit = discretize(nu_n(model, theta, s.d, s.m, s.n))
        except Exception as exc:  # recorded per row
            limit_error = f"{type(exc).__name__}: {exc}"
    for seed in seeds:
        row = _row_head(cfg, s, theta, seed)
        start = time.perf_counter()
        try:
            if limit is None:
                raise RuntimeError(limit_error)
            X = simulate(model, s.n, seed).data
            row["dbl"] = bl_distance(daniell_matrix(X, theta, s.m).esd(), limit)
            row["error"] = ""
        except Exception as exc:
            row["dbl"], row["error"] = float("nan"), f"{type(exc).__name__}: {exc}"
        if cfg.timing:
            row["runtime_ms"] = 1e3 * (time.perf_counter() - start)
        rows.append(row)
    return rows


def run_theorem1(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """BL distance between the ESD of the smoothed periodogram and the discretized limit law."""
    return [row for rows in _map(_theorem1_task, _tasks(cfg), cfg.threads) for row in rows]


def _prop1_task(task: _Task) -> list[dict[str, Any]]:
    cfg, s = task.cfg, task.sched
    theta = cfg.theta_list[task.theta_index]
    rows = []
    for seed in _task_seeds(cfg, s.n, task.theta_index):
        row = _row_head(cfg, s, theta, seed)
        start = time.perf_counter()
        try:
            model = build_model(cfg.model, s.d, cfg.innovation_law)
            mu_s = daniell_matrix(simulate(model, s.n, seed).data, theta, s.m).esd()
            mu_sp = approx_s_prime(model, s.n, theta, s.m, seed).esd()
            mu_st = approx_s_tilde(model, s.n, theta, s.m, seed).esd()
            row["dbl_s_sprime"] = bl_distance(mu_s, mu_sp)
            row["dbl_s_stilde"] = bl_distance(mu_s, mu_st)
            row["dbl_stilde_sprime"] = bl_distance(mu_st, mu_sp)
            row["error"] = ""
        except Exception as exc:
            for key in PROP1_COLUMNS[7:10]:
                row[key] = float("nan")
            row["error"] = f"{type(exc).__name__}: {exc}"
        if cfg.timing:
            row["runtime_ms"] = 1e3 * (time.perf_counter() - start)
        rows.append(row)
    return rows


def run_prop1(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Distances between the smoothed periodogram and its two simplified versions."""
    return [row for rows in _map(_prop1_task, _tasks(cfg), cfg.threads) for row in rows]


def median_by_n(rows: Iterable[dict[str, Any]], column: str = "dbl") -> dict[int, float]:
    """Median of ``column`` per sample size over all frequencies and replicates."""
    groups: dict[int, list[float]] = {}
    for row in rows:
        groups.setdefault(int(row["n"]), []).append(float(row[column]))
    return {n: float(np.median(v)) for n, v in sorted(groups.items())}


# ------------------------------------------------------------------------- wick

@dataclass(frozen=True)
class _WickTask:
    master: int
    index: int
    settings: WickSettings


def _wick_task(task: _WickTask) -> dict[str, Any]:
    ws = task.settings
    rng = np.random.default_rng(task_seed(task.master, task.index, 0))
    d = int(rng.integers(1, ws.d_max + 1))
    M = int(rng.integers(1, ws.M_max + 1))
    L = int(rng.integers(1, ws.L_max + 1))
    U = int(rng.integers(1, ws.factors + 1))
    cov = random_factor_model(d, M, U, rng)
    kappa = b_norm(cov)
    rec: dict[str, Any] = {"instance": task.index, "seed": task.master, "d": d, "M": M, "L": L,
                           "factors": cov.factors.tolist(), "b_norm": kappa,
                           "gershgorin": gershgorin_bound(cov),
                           "bound": theorem2_bound(kappa, L, d, M)}
    try:
        rec["exact"] = exact_trace_moment(cov, L)
        rec["inequality"] = bool(rec["exact"] <= rec["bound"])
        rec["error"] = ""
    except WickBudgetError as exc:
        rec["exact"], rec["inequality"], rec["error"] = None, None, str(exc)
    if ws.samples:
        mean, se = mc_trace_moment(cov, L, ws.samples, task_seed(task.master, task.index, 1))
        rec["mc_mean"], rec["mc_stderr"] = mean, se
        if rec["exact"] is not None:
            rec["within_3se"] = bool(abs(rec["exact"] - mean) <= 3 * se)
    return rec


def run_wick(cfg: ExperimentConfig) -> dict[str, Any]:
    """Random factor-model instances: exact Wick moment, Monte Carlo and the trace bound."""
    tasks = [_WickTask(master, i, cfg.wick) for master in cfg.seeds for i in range(cfg.wick.instances)]
    records = _map(_wick_task, tasks, cfg.threads)
    done = [r for r in records if r["exact"] is not None]
    summary = {
        "instances": len(records),
        "budget_exceeded": len(records) - len(done),
        "inequality_holds": sum(r["inequality"] for r in done),
    }
    if cfg.wick.samples:
        summary["within_3se"] = sum(r.get("within_3se", False) for r in done)
    return {"summary": summary, "instances": records}


# ---------------------------------------------------------------------- density

DENSITY_COLUMNS = ["x", "esd_hist_density", "mp_density"]


def emit_density(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """ESD histogram of one smoothed periodogram next to the limiting density.

    Uses the first sample size, frequency and seed of the config.
    """
    s = cfg.schedules()[0]
    theta = cfg.theta_list[0]
    model = build_model(cfg.model, s.d, cfg.innovation_law)
    seed = task_seed(cfg.seeds[0], s.n, 0, 0)
    lam = daniell_matrix(simulate(model, s.n, seed).data, theta, s.m).esd().atoms
    sol = nu_n(model, theta, s.d, s.m, s.n)
    top = 1.1 * max(float(lam.max()), float(sol.H.atoms.max()) * (1 + math.sqrt(sol.c)) ** 2)
    edges = np.linspace(0.0, top, cfg.bins + 1)
    counts, _ = np.histogram(lam, edges)
    width = edges[1] - edges[0]
    x = 0.5 * (edges[:-1] + edges[1:])
    hist = counts / (lam.size * width)
    dens = mp_density(sol, x)
    return [{"x": a, "esd_hist_density": h, "mp_density": f} for a, h, f in zip(x, hist, dens)]


# ---------------------------------------------------------------------- mp-solve

MP_COLUMNS = ["re_z", "im_z", "re_m", "im_m", "residual", "iterations", "converged"]


def _population_law(spec: dict[str, Any]) -> DiscreteMeasure:
    if "csv" in spec:
        return DiscreteMeasure.from_csv(spec["csv"])
    atoms = np.asarray(spec.get("atoms", [1.0]), dtype=float)
    if "weights" in spec:
        return DiscreteMeasure(atoms, np.asarray(spec["weights"], dtype=float))
    return DiscreteMeasure.uniform(atoms)


def _z_points(spec: dict[str, Any]) -> np.ndarray:
    if "z" in spec:
        return np.array([complex(a, b) for a, b in spec["z"]])
    re = np.linspace(*spec.get("re", [-2.0, 4.0, 20]))
    im = np.linspace(*spec.get("im", [0.05, 2.0, 10]))
    return (re[:, None] + 1j * im[None, :]).ravel()


def run_mp_solve(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Solve the Marchenko-Pastur equation on the points given in ``cfg.mp``.

    ``cfg.mp`` holds ``H`` (``atoms``/``weights`` or ``csv``), ``c`` and either
    explicit ``z`` pairs or ``re``/``im`` linspace triples.
    """
    spec = cfg.mp
    try:
        sol = MPSolution(_population_law(spec.get("H", {})), float(spec.get("c", cfg.c_target)))
        z = _z_points(spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad mp settings: {exc}") from exc
    if np.any(z.imag <= 0):
        raise ConfigError("all z must have positive imaginary part")
    info = mp_solve_diagnostics(sol, z)
    ok = (info.residual <= sol.tol) & (info.m.imag > 0)
    return [{"re_z": a.real, "im_z": a.imag, "re_m": b.real, "im_m": b.imag, "residual": r,
             "iterations": int(k), "converged": bool(c)}
            for a, b, r, k, c in zip(z, info.m, info.residual, info.iterations, ok)]


# -------------------------------------------------------------------- check-model

SCHEDULE_COLUMNS = ["n", "m", "d", "c_n", "model_ok", "head", "max_tail_ratio"]


def check_model(cfg: ExperimentConfig, assumptions: ModelAssumptions | None = None) -> list[dict[str, Any]]:
    """Schedule table with the coefficient-decay check of the model at each ``d``."""
    assumptions = assumptions or ModelAssumptions(alpha=cfg.alpha, c=cfg.c_target)
    rows = []
    for s in cfg.schedules():
        report = check_assumptions(build_model(cfg.model, s.d, cfg.innovation_law), assumptions)
        ratios = [t / b for t, b in zip(report["tail_sums"], report["tail_bounds"])]
        rows.append({"n": s.n, "m": s.m, "d": s.d, "c_n": s.c_n, "model_ok": report["ok"],
                     "head": report["head"], "max_tail_ratio": max(ratios, default=0.0)})
    return rows
