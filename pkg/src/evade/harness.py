"""Trial orchestration: survival sweeps, threshold bisection, lemma oracles.

Seeds: trial ``t`` of an uncoupled sweep at grid index ``g`` uses
``derive_seed(master_seed, t, g)``; a coupled sweep uses
``derive_seed(master_seed, t)`` for one realization at the largest
intensity (or smallest speed) and reuses it at every grid point, thinning
with the particle marks.  Work is split into contiguous trial chunks and
reduced in trial order, so the output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from . import dynamics as dyn
from . import evasion as ev
from . import influence as inf
from . import percolation as pc
from .model import CONTINUUM, ModelParams, level_end
from .stats import derive_seed, wilson_interval

FORMAT_VERSION = 1
CSV_COLUMNS = ("grid_value", "estimate", "ci_low", "ci_high", "trials", "failures", "seed",
               "format_version", "discretized")
STRATEGY_ALIASES = {"percolation": "percolation_follower"}
# strategies whose per-realization survival is monotone along a coupled lambda grid
MONOTONE_STRATEGIES = ("stationary", "drift", "percolation_follower")


def _strictly_monotone(grid) -> bool:
    d = np.diff(np.asarray(grid, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    strategy: str = "percolation_follower"
    depth: int = 20
    horizon: Optional[float] = None
    trials: int = 100
    master_seed: int = 0
    lambda_grid: Optional[tuple] = None
    speed_grid: Optional[tuple] = None
    coupled: bool = False
    output: Optional[str] = None
    fmt: str = "csv"
    step_dt: float = 0.01
    lookahead: float = 1.0
    drift_speed: Optional[float] = None
    threads: int = 1
    epsilon: float = dyn.DEFAULT_EPSILON
    threshold: float = 0.5
    lambda_range: tuple = (1e-3, 2.0)
    tolerance: float = 1e-3
    c_hat: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", STRATEGY_ALIASES.get(self.strategy, self.strategy))
        if self.strategy not in ev.STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.lambda_grid is not None and self.speed_grid is not None:
            raise ValueError("give a lambda grid or a speed grid, not both")
        for name in ("lambda_grid", "speed_grid"):
            g = getattr(self, name)
            if g is not None:
                g = tuple(float(v) for v in g)
                object.__setattr__(self, name, g)
                if len(g) > 1 and not _strictly_monotone(g):
                    raise ValueError(f"{name} must be strictly monotone")
                if name == "lambda_grid" and min(g) < 0:
                    raise ValueError("intensities must be >= 0")
                if name == "speed_grid" and min(g) <= 0:
                    raise ValueError("speeds must be > 0")
        if self.fmt not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def grid_kind(self) -> str:
        return "speed" if self.speed_grid is not None else "lambda"

    @property
    def grid(self) -> tuple:
        if self.speed_grid is not None:
            return self.speed_grid
        if self.lambda_grid is not None:
            return self.lambda_grid
        return (self.params.lam,)

    def params_at(self, value: float) -> ModelParams:
        if self.grid_kind == "speed":
            return self.params.replace(speed=value)
        return self.params.replace(lam=value)

    def survival_horizon(self, params: ModelParams) -> float:
        return level_end(self.depth, params.speed) if self.horizon is None else self.horizon

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["params"] = dataclasses.asdict(self.params)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["params"] = ModelParams(**d["params"])
        for k in ("lambda_grid", "speed_grid", "lambda_range"):
            if d.get(k) is not None:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class GridRow:
    grid_value: float
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    failures: int
    seed: int
    discretized: bool = False


@dataclass
class ExperimentResult:
    rows: list
    config: ExperimentConfig
    wall_time: float = 0.0
    monotonicity_violations: int = 0
    soundness_violations: int = 0
    outcomes: Optional[np.ndarray] = field(default=None, repr=False)  # (trials, grid) survival
    version: str = __version__

    @property
    def discretized(self) -> bool:
        return self.config.params.mode == CONTINUUM

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(r.grid_value)), repr(float(r.estimate)), repr(float(r.ci_low)),
                        repr(float(r.ci_high)), r.trials, r.failures, r.seed, FORMAT_VERSION,
                        int(r.discretized)])
        return buf.getvalue()

    def to_json(self, include_wall_time: bool = True) -> str:
        meta = dict(format_version=FORMAT_VERSION, version=self.version,
                    config=self.config.to_dict(), grid_kind=self.config.grid_kind,
                    discretized=self.discretized,
                    monotonicity_violations=self.monotonicity_violations,
                    soundness_violations=self.soundness_violations)
        if include_wall_time:
            meta["wall_time"] = self.wall_time
        rows = [dict(zip(CSV_COLUMNS, (r.grid_value, r.estimate, r.ci_low, r.ci_high, r.trials,
                                       r.failures, r.seed, FORMAT_VERSION, r.discretized)))
                for r in self.rows]
        return json.dumps(dict(meta, rows=rows), indent=2, sort_keys=True)

    def write(self, path=None) -> str:
        text = self.to_csv() if self.config.fmt == "csv" else self.to_json()
        path = path or self.config.output
        if path:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# Per-trial work -----------------------------------------------------------------


def _evaluate(config: ExperimentConfig, real, params: ModelParams) -> tuple:
    """Survival, failure and soundness flags of one strategy run."""
    H = config.survival_horizon(params)
    traj = ev.run_strategy(config.strategy, real, config.depth, config.drift_speed,
                           config.lookahead)
    if traj is None:
        return False, True, 0
    out = ev.detection_time(traj, real, H)
    bad = 0
    covered = H <= level_end(config.depth, params.speed) * (1 + 1e-12)
    if config.strategy == "percolation_follower" and covered:
        bad = int(out.detected or not ev.check_admissible(traj, params.speed).ok)
    return not out.detected, False, bad


def _window(config: ExperimentConfig, params: ModelParams):
    H = max(level_end(config.depth, params.speed), config.horizon or 0.0)
    return dyn.make_window(params, config.depth, H, config.epsilon)


def _relabel(real, params: ModelParams):
    return dataclasses.replace(real, params=params)


def _run_chunk(config: ExperimentConfig, trials: range) -> tuple:
    grid = config.grid
    surv = np.zeros((len(trials), len(grid)), bool)
    fail = np.zeros((len(trials), len(grid)), bool)
    sound = 0
    if config.coupled:
        if config.grid_kind == "lambda":
            base = config.params.replace(lam=max(grid))
        else:
            base = config.params.replace(speed=min(grid))
        window = _window(config, base)
        for i, t in enumerate(trials):
            real = dyn.sample_realization(base, window, derive_seed(config.master_seed, t),
                                          step_dt=config.step_dt)
            for g, v in enumerate(grid):
                p = config.params_at(v)
                if config.grid_kind == "lambda":
                    r = real.thin(v) if v < base.lam else real
                else:
                    r = _relabel(real, p)
                surv[i, g], fail[i, g], b = _evaluate(config, r, p)
                sound += b
    else:
        for g, v in enumerate(grid):
            p = config.params_at(v)
            window = _window(config, p)
            for i, t in enumerate(trials):
                real = dyn.sample_realization(p, window, derive_seed(config.master_seed, t, g),
                                              step_dt=config.step_dt)
                surv[i, g], fail[i, g], b = _evaluate(config, real, p)
                sound += b
    return surv, fail, sound


def _chunks(n: int, parts: int) -> list:
    size = max(1, math.ceil(n / parts))
    return [range(lo, min(n, lo + size)) for lo in range(0, n, size)]


def _map_chunks(fn: Callable, config, n: int, threads: int) -> list:
    chunks = _chunks(n, threads if threads > 1 else 1)
    if threads <= 1 or len(chunks) == 1:
        return [fn(config, c) for c in chunks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, [config] * len(chunks), chunks))


def _monotone_violations(surv: np.ndarray, grid: Sequence[float], kind: str) -> int:
    """Trials where survival improves as the grid moves towards more danger."""
    order = np.argsort(grid)
    s = surv[:, order].astype(int)
    if kind == "lambda":   # survival must not increase with lam
        return int(np.sum(np.diff(s, axis=1) > 0))
    return int(np.sum(np.diff(s, axis=1) < 0))  # must not decrease with speed


def run_survival(config: ExperimentConfig) -> ExperimentResult:
    """Fraction of trials in which the strategy is undetected up to the horizon."""
    t0 = time.perf_counter()
    parts = _map_chunks(_run_chunk, config, config.trials, config.threads)
    surv = np.concatenate([p[0] for p in parts])
    fail = np.concatenate([p[1] for p in parts])
    sound = sum(p[2] for p in parts)
    rows = []
    disc = config.params.mode == CONTINUUM
    for g, v in enumerate(config.grid):
        k = int(surv[:, g].sum())
        lo, hi = wilson_interval(k, config.trials)
        rows.append(GridRow(float(v), k / config.trials, lo, hi, config.trials,
                            int(fail[:, g].sum()), int(config.master_seed), disc))
    mono = 0
    monotone = MONOTONE_STRATEGIES if config.grid_kind == "lambda" else ("stationary",)
    if config.coupled and config.strategy in monotone and len(config.grid) > 1:
        mono = _monotone_violations(surv, config.grid, config.grid_kind)
    return ExperimentResult(rows, config, time.perf_counter() - t0, mono, sound, surv)


# Threshold bisection ------------------------------------------------------------


class NoCrossing(ValueError):
    """The survival curve does not cross the threshold inside the range."""


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    threshold: float
    depth: int
    speed: float
    evaluations: int
    label: str = ("finite-depth, percolation-follower survival crossing; a lower-bound proxy "
                  "for the detection threshold, not the threshold itself")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def bisect_survival(fn: Callable[[float], float], lo: float, hi: float, threshold: float,
                    tol: float, max_iter: int = 200) -> tuple:
    """Bracket ``[a, b]`` with ``fn(a) >= threshold > fn(b)`` and ``b - a <= tol``.

    ``fn`` is a survival estimate, non-increasing in its argument.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    f_lo, f_hi = fn(lo), fn(hi)
    n = 2
    if f_lo < threshold:
        raise NoCrossing(f"survival {f_lo:.4g} already below {threshold} at {lo}")
    if f_hi >= threshold:
        raise NoCrossing(f"survival {f_hi:.4g} still at least {threshold} at {hi}")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        n += 1
        if fn(mid) >= threshold:
            lo = mid
        else:
            hi = mid
    return lo, hi, n


def follower_thresholds(params: ModelParams, depth: int, trials: int, seed: int,
                        base_lam: float, window_depth: Optional[int] = None,
                        step_dt: float = 0.01, epsilon: float = dyn.DEFAULT_EPSILON
                        ) -> np.ndarray:
    """Per trial, the mark threshold below which a vacant path to ``depth`` survives.

    The follower survives at intensity ``lam`` iff ``lam / base_lam`` is at
    most the trial's value.  ``window_depth`` lets runs at different depths
    share realizations.
    """
    wd = depth if window_depth is None else window_depth
    if wd < depth:
        raise ValueError("window_depth must be at least depth")
    base = params.replace(lam=base_lam)
    window = dyn.make_window(base, wd, epsilon=epsilon)
    out = np.empty(trials)
    for t in range(trials):
        real = dyn.sample_realization(base, window, derive_seed(seed, t), step_dt=step_dt)
        out[t] = pc.path_bottleneck(pc.compute_vacancy_field(real, wd), depth)
    return out


def estimate_lambda_det(speed: float, config: ExperimentConfig, depth: Optional[int] = None,
                        window_depth: Optional[int] = None) -> Bracket:
    """Bracket where follower survival at fixed depth crosses the threshold."""
    depth = config.depth if depth is None else depth
    lo, hi = config.lambda_range
    params = config.params.replace(speed=speed)
    u = follower_thresholds(params, depth, config.trials, config.master_seed, hi,
                            window_depth, config.step_dt, config.epsilon)

    def survival(lam):
        return float(np.mean(lam / hi <= u))

    a, b, n = bisect_survival(survival, lo, hi, config.threshold, config.tolerance)
    return Bracket(a, b, config.threshold, depth, speed, n)


# Lemma suite --------------------------------------------------------------------


@dataclass
class LemmaSuiteReport:
    psi: list
    n_count: list
    chi: inf.ChiSampleSet
    chi_fit: Optional[inf.TailFit]
    chi_error: Optional[str] = None

    @property
    def psi_ok(self) -> bool:
        return all(r.bound_ok for r in self.psi)

    @property
    def n_count_ok(self) -> bool:
        return all(r.passed for r in self.n_count)

    @property
    def chi_ok(self) -> bool:
        return (self.chi_fit is not None and self.chi_fit.exponential
                and self.chi.censored_fraction < 0.01)

    @property
    def passed(self) -> bool:
        return self.psi_ok and self.n_count_ok and self.chi_ok

    def summary(self) -> dict:
        return dict(
            psi=[dict(k=r.k, max_mean=r.max_mean, bound_ok=r.bound_ok, far_mean=r.far_mean,
                      correlation=r.correlation) for r in self.psi],
            n_count=[dict(k=r.k, c_hat=r.c_hat, ties=r.ties, passed=r.passed) for r in self.n_count],
            chi=dict(samples=len(self.chi), censored_fraction=self.chi.censored_fraction,
                     rate=None if self.chi_fit is None else self.chi_fit.rate,
                     residual=None if self.chi_fit is None else self.chi_fit.residual,
                     error=self.chi_error, ok=self.chi_ok),
            passed=self.passed)


def run_lemma_suite(config: ExperimentConfig, psi_ks: Sequence[int] = (1, 5),
                    n_ks: Sequence[int] = (5,), chi_samples: int = 20_000,
                    chi_horizon: float = inf.DEFAULT_CHI_HORIZON,
                    chi_range: tuple = (5.0, 20.0)) -> LemmaSuiteReport:
    """Run the three lemma oracles with the config's model and trial count."""
    p = config.params
    seed = config.master_seed
    psi = [inf.lemma_psi_intensity(p, k, config.trials, derive_seed(seed, 1, k)) for k in psi_ks]
    nc = [inf.lemma_n_count(p, k, config.trials, derive_seed(seed, 2, k)) for k in n_ks]
    chi = inf.sample_chi(p, chi_samples, chi_horizon, derive_seed(seed, 3), step_dt=config.step_dt)
    fit, err = None, None
    try:
        fit = inf.fit_exponential_tail(chi.uncensored_chi(), chi_range[0], chi_range[1])
    except ValueError as exc:
        err = str(exc)
    return LemmaSuiteReport(psi, nc, chi, fit, err)


def default_threads() -> int:
    return os.cpu_count() or 1
