"""Vacancy and blocked fields on the plane, and oriented path search.

Fields are stored as dense ``(2D + 1, 2D + 1)`` grids indexed by
``(x + D, y + D)``; entries outside the diamond ``|i|_1 <= D`` hold -1.
Paths are oriented: every step goes from level ``k`` to level ``k + 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import dynamics as dyn
from . import influence as inf
from .model import LATTICE, ModelParams, level_end, level_sites
from .stats import derive_seed, stream, wilson_interval

OUTSIDE = -1


def _levels(depth: int) -> np.ndarray:
    r = np.arange(-depth, depth + 1)
    return np.abs(r)[:, None] + np.abs(r)[None, :]


def _neighbour_max(a: np.ndarray, fill) -> np.ndarray:
    """Elementwise max over the four lattice neighbours."""
    out = np.full_like(a, fill)
    np.maximum(out[1:, :], a[:-1, :], out=out[1:, :])
    np.maximum(out[:-1, :], a[1:, :], out=out[:-1, :])
    np.maximum(out[:, 1:], a[:, :-1], out=out[:, 1:])
    np.maximum(out[:, :-1], a[:, 1:], out=out[:, :-1])
    return out


@dataclass
class VacancyField:
    """Indicators ``E_i`` of the cells up to level ``depth``.

    ``min_mark`` holds, per cell, the smallest thinning mark among the
    particles touching it (``inf`` when none), so the field of every thinned
    realization can be read off without recomputation.
    """

    depth: int
    grid: np.ndarray
    dim: int = 2
    seed: Optional[int] = None
    params: Optional[ModelParams] = None
    min_mark: Optional[np.ndarray] = field(default=None, repr=False)
    base_lam: Optional[float] = None

    @classmethod
    def from_values(cls, depth: int, values, dim: int = 2) -> "VacancyField":
        """Field from a dict ``site -> 0/1`` or a full grid; unspecified sites are vacant."""
        lv = _levels(depth)
        if isinstance(values, dict):
            grid = np.where(lv <= depth, 1, OUTSIDE).astype(np.int8)
            for s, v in values.items():
                grid[s[0] + depth, s[1] + depth] = int(v)
        else:
            grid = np.where(lv <= depth, np.asarray(values, dtype=np.int8), OUTSIDE).astype(np.int8)
        return cls(depth, grid, dim)

    def __getitem__(self, site) -> int:
        x, y = site[0] + self.depth, site[1] + self.depth
        if not (0 <= x < self.grid.shape[0] and 0 <= y < self.grid.shape[1]):
            return OUTSIDE
        return int(self.grid[x, y])

    @property
    def entries(self) -> dict:
        pad = (0,) * (self.dim - 2)
        xs, ys = np.nonzero(self.grid != OUTSIDE)
        return {(int(x) - self.depth, int(y) - self.depth) + pad: int(self.grid[x, y])
                for x, y in zip(xs, ys)}

    def level_values(self, k: int) -> np.ndarray:
        return self.grid[_levels(self.depth) == k]

    def vacant(self) -> np.ndarray:
        return self.grid == 1


@dataclass
class BlockedField:
    """Indicators ``Y_i`` built from influence regions.

    ``grid`` blocks a site when it lies in the square of any region whose
    centre is on the same or a lower level; this version is dominated by the
    vacancy field pointwise.  ``same_level`` only uses regions centred on the
    site's own level.
    """

    depth: int
    grid: np.ndarray
    same_level: np.ndarray
    regions: list
    dim: int = 2

    def __getitem__(self, site) -> int:
        return int(self.grid[site[0] + self.depth, site[1] + self.depth])

    @property
    def entries(self) -> dict:
        pad = (0,) * (self.dim - 2)
        xs, ys = np.nonzero(self.grid != OUTSIDE)
        return {(int(x) - self.depth, int(y) - self.depth) + pad: int(self.grid[x, y])
                for x, y in zip(xs, ys)}


def _require_cells(realization, depth: int):
    w = realization.window
    if w.region_radius < depth or w.horizon < level_end(depth, realization.params.speed) * (1 - 1e-12):
        raise dyn.CertificationError(
            f"window (radius {w.region_radius}, horizon {w.horizon}) does not cover cells "
            f"up to level {depth}")


def compute_vacancy_field(realization, depth: int, radius_cap: Optional[int] = None
                          ) -> VacancyField:
    """Exact vacancy of every cell up to ``depth``.

    Sites beyond ``radius_cap`` in either coordinate are left out of the
    field (stored as -1, so paths cannot use them).
    """
    _require_cells(realization, depth)
    r = realization
    lv = _levels(depth)
    v = r.cell_visits
    sel = v.level <= depth
    x = v.xy[sel, 0] + depth
    y = v.xy[sel, 1] + depth
    mm = np.full(lv.shape, np.inf)
    np.minimum.at(mm, (x, y), r.marks[v.pid[sel]])
    grid = np.where(np.isfinite(mm), 0, 1).astype(np.int8)
    inside = lv <= depth
    if radius_cap is not None:
        c = np.abs(np.arange(-depth, depth + 1)) <= radius_cap
        inside &= c[:, None] & c[None, :]
    grid[~inside] = OUTSIDE
    mm[~inside] = -np.inf
    return VacancyField(depth, grid, r.params.dim, r.seed, r.params, mm, r.base_lam)


def find_oriented_vacant_path(field: VacancyField, depth: Optional[int] = None
                              ) -> Optional[list]:
    """Oriented path of vacant sites from the origin up to level ``depth``.

    Reachable sets are propagated level by level, then the path is read off
    forwards taking the lexicographically smallest successor that can still
    reach the last level.
    """
    D = field.depth
    depth = D if depth is None else depth
    if depth > D:
        raise ValueError(f"field only covers levels up to {D}")
    open_ = field.grid == 1
    lv = _levels(D)
    if not open_[D, D]:
        return None
    reach = [None] * (depth + 1)
    cur = np.zeros_like(open_)
    cur[D, D] = True
    reach[0] = cur
    for k in range(1, depth + 1):
        cur = _neighbour_max(cur, False) & open_ & (lv == k)
        if not cur.any():
            return None
        reach[k] = cur
    good = reach[depth]
    goods = [None] * (depth + 1)
    goods[depth] = good
    for k in range(depth - 1, -1, -1):
        good = reach[k] & _neighbour_max(goods[k + 1], False)
        goods[k] = good
    pad = (0,) * (field.dim - 2)
    path = [(0, 0) + pad]
    x, y = 0, 0
    for k in range(1, depth + 1):
        cand = sorted((x + dx, y + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                      if abs(x + dx) + abs(y + dy) == k)
        for cx, cy in cand:
            if goods[k][cx + D, cy + D]:
                x, y = cx, cy
                break
        else:  # pragma: no cover - excluded by the backward pass
            raise AssertionError("backward pass inconsistent")
        path.append((x, y) + pad)
    return path


def reachable_counts(field: VacancyField, depth: Optional[int] = None) -> list:
    """Size of the reachable set on each level."""
    D = field.depth
    depth = D if depth is None else depth
    open_ = field.grid == 1
    lv = _levels(D)
    cur = np.zeros_like(open_)
    cur[D, D] = open_[D, D]
    out = [int(cur.sum())]
    for k in range(1, depth + 1):
        cur = _neighbour_max(cur, False) & open_ & (lv == k)
        out.append(int(cur.sum()))
    return out


def path_bottleneck(field: VacancyField, depth: Optional[int] = None) -> float:
    """Largest mark threshold ``u`` such that a vacant path exists when only
    particles with ``mark < u`` are kept.

    The thinned realization at intensity ``lam`` keeps marks below
    ``lam / base_lam``, so a path exists there iff ``lam / base_lam`` is at
    most this value.
    """
    if field.min_mark is None:
        raise ValueError("field carries no mark information")
    D = field.depth
    depth = D if depth is None else depth
    lv = _levels(D)
    b = np.full(lv.shape, -np.inf)
    b[D, D] = field.min_mark[D, D]
    for k in range(1, depth + 1):
        nb = _neighbour_max(np.where(lv == k - 1, b, -np.inf), -np.inf)
        b = np.where(lv == k, np.minimum(field.min_mark, nb), b)
    return float(b[lv == depth].max())


def compute_blocked_field(realization, depth: int, c_hat: Optional[float] = None,
                          phantom_seed: Optional[int] = None) -> BlockedField:
    """Blocked field from the realization's entries plus phantom chi draws.

    ``c_hat`` is the entry-count constant (default: a cached estimate for the
    model).  ``phantom_seed`` fixes the phantom draws; by default it is
    derived from the realization seed, so thinned copies share phantoms.
    """
    _require_cells(realization, depth)
    p = realization.params
    if c_hat is None:
        c_hat = inf.default_c_hat(p.dim, p.speed, p.mode, p.jump_rate)
    regions = inf.regions_from_realization(realization, depth, c_hat, phantom_seed)
    return blocked_from_regions(regions, depth, p.dim)


def blocked_from_regions(regions: Sequence, depth: int, dim: int = 2) -> BlockedField:
    """Apply the squares of ``regions`` to the diamond of radius ``depth``."""
    lv = _levels(depth)
    first_block = np.full(lv.shape, np.iinfo(np.int64).max)
    same = np.ones(lv.shape, np.int8)
    n = 2 * depth + 1
    for reg in regions:
        if reg.empty:
            continue
        lo, hi = reg.square_bounds()
        x0, x1 = max(lo[0] + depth, 0), min(hi[0] + depth, n - 1)
        y0, y1 = max(lo[1] + depth, 0), min(hi[1] + depth, n - 1)
        if x0 > x1 or y0 > y1:
            continue
        blk = first_block[x0:x1 + 1, y0:y1 + 1]
        np.minimum(blk, reg.level, out=blk)
        sub = same[x0:x1 + 1, y0:y1 + 1]
        sub[lv[x0:x1 + 1, y0:y1 + 1] == reg.level] = 0
    grid = np.where(first_block <= lv, 0, 1).astype(np.int8)
    inside = lv <= depth
    grid[~inside] = OUTSIDE
    same[~inside] = OUTSIDE
    return BlockedField(depth, grid, same, list(regions), dim)


def coupled_realization(params: ModelParams, window, seed: int, base_lam: Optional[float] = None,
                        step_dt: float = 0.01):
    """Realization at ``params.lam`` obtained by thinning one drawn at ``base_lam``."""
    base = params.lam if base_lam is None else base_lam
    if base < params.lam:
        raise ValueError("base intensity must be at least the target intensity")
    real = dyn.sample_realization(params.replace(lam=base), window, seed, step_dt=step_dt)
    return real if base == params.lam else real.thin(params.lam)


@dataclass
class LevelMarginal:
    level: int
    sites: int
    mean_e: float
    mean_y: float
    min_e: float
    min_y: float


@dataclass
class VacancyMarginal:
    lam: float
    depth: int
    trials: int
    levels: list
    p_hat_e: float
    p_hat_y: float
    ci_e: tuple
    ci_y: tuple
    site_freq_e: np.ndarray = field(repr=False)
    site_freq_y: np.ndarray = field(repr=False)
    dominance_violations: int = 0
    discretized: bool = False


def estimate_vacancy_marginal(params: ModelParams, depth: int, trials: int, seed: int,
                              base_lam: Optional[float] = None, c_hat: Optional[float] = None,
                              step_dt: float = 0.01) -> VacancyMarginal:
    """Per-site frequencies of ``E_i = 1`` and ``Y_i = 1`` up to ``depth``.

    The minimum over sites is reported as ``p_hat`` with the Wilson interval
    of the minimising site.  Realizations are drawn at ``base_lam`` (default
    ``params.lam``) and thinned, so calls sharing ``seed`` and ``base_lam``
    are coupled.  ``dominance_violations`` counts sites and trials with
    ``Y_i > E_i``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = params.lam if base_lam is None else base_lam
    window = dyn.make_window(params.replace(lam=base), depth)
    if c_hat is None:
        c_hat = inf.default_c_hat(params.dim, params.speed, params.mode, params.jump_rate)
    lv = _levels(depth)
    inside = lv <= depth
    cnt_e = np.zeros(lv.shape, np.int64)
    cnt_y = np.zeros(lv.shape, np.int64)
    bad = 0
    for t in range(trials):
        real = coupled_realization(params, window, derive_seed(seed, t), base, step_dt)
        e = compute_vacancy_field(real, depth).grid
        y = compute_blocked_field(real, depth, c_hat).grid
        cnt_e += e == 1
        cnt_y += y == 1
        bad += int(np.sum((y > e) & inside))
    fe = cnt_e / trials
    fy = cnt_y / trials
    levels = []
    for k in range(depth + 1):
        m = lv == k
        levels.append(LevelMarginal(k, int(m.sum()), float(fe[m].mean()), float(fy[m].mean()),
                                    float(fe[m].min()), float(fy[m].min())))
    ie = np.unravel_index(np.argmin(np.where(inside, fe, np.inf)), lv.shape)
    iy = np.unravel_index(np.argmin(np.where(inside, fy, np.inf)), lv.shape)
    return VacancyMarginal(params.lam, depth, trials, levels, float(fe[ie]), float(fy[iy]),
                           wilson_interval(int(cnt_e[ie]), trials),
                           wilson_interval(int(cnt_y[iy]), trials),
                           np.where(inside, fe, np.nan), np.where(inside, fy, np.nan), bad,
                           params.mode != LATTICE)


@dataclass
class PathProbability:
    lambdas: list
    successes: list
    trials: int
    depth: int
    monotonicity_violations: int = 0
    field_violations: int = 0

    @property
    def estimates(self) -> list:
        return [s / self.trials for s in self.successes]

    @property
    def intervals(self) -> list:
        return [wilson_interval(s, self.trials) for s in self.successes]


def estimate_path_probability(params: ModelParams, depth: int, trials: int, seed: int,
                              lambdas: Optional[Sequence[float]] = None,
                              step_dt: float = 0.01) -> PathProbability:
    """Fraction of realizations with an oriented vacant path to ``depth``.

    With a ``lambdas`` grid, each trial draws one realization at the largest
    intensity and thins it to every grid point; pointwise monotonicity of the
    vacancy fields and of path existence is counted along the way.
    """
    lams = sorted(set([params.lam] if lambdas is None else [float(v) for v in lambdas]))
    base = lams[-1]
    window = dyn.make_window(params.replace(lam=base), depth)
    succ = [0] * len(lams)
    mono = field_bad = 0
    for t in range(trials):
        real = dyn.sample_realization(params.replace(lam=base), window, derive_seed(seed, t),
                                      step_dt=step_dt)
        prev_grid, prev_ok = None, None
        for g, lam in enumerate(lams):
            thinned = real.thin(lam) if lam < base else real
            f = compute_vacancy_field(thinned, depth)
            ok = find_oriented_vacant_path(f, depth) is not None
            succ[g] += ok
            if prev_grid is not None:
                field_bad += int(np.sum(f.grid > prev_grid))  # more vacant at higher lam
                mono += int(ok and not prev_ok)
            prev_grid, prev_ok = f.grid, ok
    return PathProbability(lams, succ, trials, depth, mono, field_bad)


def iid_path_probability(p: float, depth: int, trials: int, seed: int) -> tuple:
    """Oriented path probability for an i.i.d. Bernoulli(p) field (calibration)."""
    rng = stream(seed, 11)
    lv = _levels(depth)
    hits = 0
    for _ in range(trials):
        grid = (rng.random(lv.shape) < p).astype(np.int8)
        f = VacancyField.from_values(depth, grid)
        hits += find_oriented_vacant_path(f) is not None
    return hits / trials, wilson_interval(hits, trials)


def export_fields_csv(path, vacancy: VacancyField, blocked: Optional[BlockedField] = None) -> None:
    """Sparse CSV of ``x, y, level, E`` (and ``Y``) over the diamond."""
    D = vacancy.depth
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "level", "E"] + (["Y"] if blocked is not None else []))
        for k in range(D + 1):
            for s in level_sites(k):
                row = [s[0], s[1], k, vacancy[s]]
                if blocked is not None:
                    row.append(blocked[s])
                w.writerow(row)


__all__ = [
    "VacancyField", "BlockedField", "compute_vacancy_field", "find_oriented_vacant_path",
    "reachable_counts", "path_bottleneck", "compute_blocked_field", "blocked_from_regions", "coupled_realization",
    "estimate_vacancy_marginal", "estimate_path_probability", "iid_path_probability",
    "export_fields_csv", "VacancyMarginal", "PathProbability",
]
