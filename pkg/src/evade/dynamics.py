"""Finite realizations of the mobile Poisson particle system.

A realization is sampled on a buffered box around a *certified region*: the
plane sites with ``|i|_1 <= region_radius`` over ``[0, horizon]``.  The
buffer is sized so that the expected number of omitted particles that could
have reached the certified region is below ``epsilon_truncation``.  After
the walks are drawn, particles that provably cannot reach the region are
dropped as well (a lattice walk needs at least as many jumps as its l1
distance to the region), so every query inside the region is exact.

Thinning is done with per-particle uniform marks: the realization at a lower
intensity ``lam'`` keeps exactly the particles with ``mark < lam' / base_lam``,
which makes coupled realizations nested.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace as _dc_replace
from functools import cached_property, lru_cache
from typing import NamedTuple, Optional, Union

import numpy as np

from .model import (CELL_RADIUS, CONTINUUM, LATTICE, ModelParams, in_hyperplane,
                    l1, level_end, level_start)
from .stats import log_poisson_tail_bound, stream

FORMAT_VERSION = 1
DEFAULT_EPSILON = 1e-6

_CLOUD, _WALKS = 0, 1


class CertificationError(ValueError):
    """Query outside the region where the truncation guarantee holds."""


@dataclass(frozen=True)
class SimulationWindow:
    dim: int
    region_radius: int
    horizon: float
    buffer_radius: float
    epsilon_truncation: float
    mode: str = LATTICE

    def spatial_box(self) -> tuple:
        """Axis-aligned box holding every certified cell."""
        r = self.region_radius
        lo = np.array([-r, -r] + [0] * (self.dim - 2))
        return lo, -lo

    def sampling_box(self) -> tuple:
        pad = CELL_RADIUS if self.mode == CONTINUUM else 0
        b = self.buffer_radius
        hi = np.array([self.region_radius + pad + b] * 2 + [pad + b] * (self.dim - 2),
                      dtype=float if self.mode == CONTINUUM else int)
        return -hi, hi

    def certifies(self, site, t0: float = 0.0, t1: float = 0.0) -> bool:
        return (len(site) == self.dim and in_hyperplane(site)
                and l1(site) <= self.region_radius
                and 0 <= t0 <= t1 <= self.horizon * (1 + 1e-12))

    def require(self, site, t0: float = 0.0, t1: float = 0.0):
        if not self.certifies(site, t0, t1):
            raise CertificationError(
                f"query {site} over [{t0}, {t1}] is outside the certified region "
                f"(l1 radius {self.region_radius}, horizon {self.horizon})")


def _sphere_count(k: int, b: int) -> int:
    """Number of points of Z^k with l1 norm exactly b."""
    if k == 0:
        return 1 if b == 0 else 0
    if b == 0:
        return 1
    return sum(2 ** i * math.comb(k, i) * math.comb(b - 1, i - 1)
               for i in range(1, min(k, b) + 1))


def _shell_count(radius: int, dim: int, r: int) -> int:
    """Sites of Z^dim at l1 distance exactly r from the plane diamond."""
    total = 0
    for b in range(r + 1):
        a = r - b
        plane = 2 * radius * radius + 2 * radius + 1 if a == 0 else 4 * (radius + a)
        total += plane * _sphere_count(dim - 2, b)
    return total


@lru_cache(maxsize=256)
def _lattice_buffer(lam: float, mean_jumps: float, radius: int, dim: int, eps: float) -> int:
    if lam <= 0 or mean_jumps <= 0:
        return 0
    log_target = math.log(eps / lam)
    terms = []
    r = 1
    while True:
        lt = float(log_poisson_tail_bound(mean_jumps, np.array([r]))[0])
        term = math.log(_shell_count(radius, dim, r)) + lt
        terms.append(term)
        if r > mean_jumps and term < log_target - 40:
            break
        r += 1
    # smallest B with sum_{r > B} exp(term_r) < eps / lam
    logs = np.array(terms)
    suffix = np.logaddexp.accumulate(logs[::-1])[::-1]  # suffix[r-1] = log sum_{s>=r}
    for B in range(len(logs)):
        if suffix[B] < log_target:  # suffix[B] covers r >= B + 1
            return B
    return len(logs)


@lru_cache(maxsize=256)
def _brownian_buffer(lam: float, horizon: float, radius: int, dim: int, eps: float) -> float:
    if lam <= 0 or horizon <= 0:
        return 0.0
    c = CELL_RADIUS

    def vol(u):
        return (2 * (radius + c + u)) ** 2 * (2 * (c + u)) ** (dim - 2)

    def tail(B):
        total, r = 0.0, B
        while True:
            rho = min(1.0, 2 * dim * math.exp(-r * r / (2 * dim * horizon)))
            term = lam * (vol(r + 1) - vol(r)) * rho
            total += term
            if rho < 1 and term < eps * 1e-9:
                return total
            r += 1

    B = 0
    while tail(B) >= eps:
        B += 1
    return float(B)


def make_window(params: ModelParams, depth: int, horizon: Optional[float] = None,
                epsilon: float = DEFAULT_EPSILON) -> SimulationWindow:
    """Window certifying all cells up to level ``depth``.

    The default horizon ``(depth + 1) / S`` is the end of the last cell.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if horizon is None:
        horizon = level_end(depth, params.speed)
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if params.mode == LATTICE:
        buf = _lattice_buffer(float(params.lam), params.jump_rate * horizon, int(depth),
                              params.dim, float(epsilon))
    else:
        buf = _brownian_buffer(float(params.lam), float(horizon), int(depth), params.dim,
                               float(epsilon))
    return SimulationWindow(params.dim, int(depth), float(horizon), buf, float(epsilon),
                            params.mode)


class Residences(NamedTuple):
    """Flat per-particle residence table, particles contiguous, time ordered."""
    pid: np.ndarray
    pos: np.ndarray
    a: np.ndarray  # arrival time
    b: np.ndarray  # departure time (horizon for the last residence)


class CellVisits(NamedTuple):
    """Every (particle, cell) occupation inside the certified region.

    Rows are sorted by particle then by entry time, so the first row of each
    particle is its entry into the cell system.
    """
    pid: np.ndarray
    xy: np.ndarray      # (k, 2) plane coordinates of the cell's site
    level: np.ndarray
    t_enter: np.ndarray
    row: np.ndarray     # residence row (lattice) or grid index (continuum)


@dataclass
class _RealizationBase:
    params: ModelParams
    window: SimulationWindow
    seed: int
    start: np.ndarray
    marks: np.ndarray
    base_lam: float

    @property
    def n_particles(self) -> int:
        return len(self.start)

    def _keep_for(self, lam: float) -> np.ndarray:
        if lam > self.base_lam * (1 + 1e-12):
            raise ValueError(f"cannot thin intensity {self.base_lam} up to {lam}")
        if self.base_lam == 0:
            return np.zeros(self.n_particles, bool)
        return self.marks < lam / self.base_lam


@dataclass
class LatticeRealization(_RealizationBase):
    offsets: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    positions: Optional[np.ndarray] = None

    @property
    def evolved(self) -> bool:
        return self.offsets is not None

    def jump_history(self, k: int) -> tuple:
        lo, hi = self.offsets[k], self.offsets[k + 1]
        return self.times[lo:hi], self.positions[lo:hi]

    def thin(self, lam: float) -> "LatticeRealization":
        keep = self._keep_for(lam)
        params = self.params.replace(lam=lam)
        if not self.evolved:
            return _dc_replace(self, params=params, start=self.start[keep],
                               marks=self.marks[keep])
        counts = np.diff(self.offsets)
        flat = np.repeat(keep, counts)
        offsets = np.concatenate([[0], np.cumsum(counts[keep])])
        return LatticeRealization(params, self.window, self.seed, self.start[keep],
                                  self.marks[keep], self.base_lam, offsets,
                                  self.times[flat], self.positions[flat])

    @cached_property
    def residences(self) -> Residences:
        if not self.evolved:
            raise ValueError("realization has no jump histories; evolve it first")
        n = self.n_particles
        counts = np.diff(self.offsets)
        total = len(self.times) + n
        res_off = self.offsets + np.arange(n + 1)
        first = res_off[:-1]
        is_first = np.zeros(total, bool)
        is_first[first] = True
        pos = np.empty((total, self.params.dim), np.int64)
        pos[first] = self.start
        pos[~is_first] = self.positions
        a = np.empty(total)
        a[first] = 0.0
        a[~is_first] = self.times
        b = np.empty(total)
        b[:-1] = a[1:]
        b[res_off[1:] - 1] = self.window.horizon
        pid = np.repeat(np.arange(n), counts + 1)
        return Residences(pid, pos, a, b)

    @cached_property
    def cell_visits(self) -> CellVisits:
        res = self.residences
        S = self.params.speed
        pos = res.pos
        plane = np.all(pos[:, 2:] == 0, axis=1) if self.params.dim > 2 else np.ones(len(pos), bool)
        lvl = np.abs(pos[:, 0]) + np.abs(pos[:, 1])
        hit = (plane & (lvl <= self.window.region_radius)
               & (res.a <= level_end(lvl, S)) & (res.b >= level_start(lvl, S)))
        rows = np.flatnonzero(hit)
        lv = lvl[rows]
        t_enter = np.maximum(res.a[rows], level_start(lv, S))
        return CellVisits(res.pid[rows], pos[rows, :2].copy(), lv, t_enter, rows)


@dataclass
class BrownianRealization(_RealizationBase):
    step_dt: Optional[float] = None
    path: Optional[np.ndarray] = None  # (n, steps + 1, d)

    @property
    def evolved(self) -> bool:
        return self.path is not None

    @property
    def grid_times(self) -> np.ndarray:
        return np.arange(self.path.shape[1]) * self.step_dt

    def thin(self, lam: float) -> "BrownianRealization":
        keep = self._keep_for(lam)
        return _dc_replace(self, params=self.params.replace(lam=lam), start=self.start[keep],
                           marks=self.marks[keep],
                           path=None if self.path is None else self.path[keep])

    @cached_property
    def cell_visits(self) -> CellVisits:
        if not self.evolved:
            raise ValueError("realization has no paths; evolve it first")
        S = self.params.speed
        R = self.window.region_radius
        c = CELL_RADIUS
        t = self.grid_times
        P = self.path
        if len(P) == 0:
            e = np.zeros(0, np.int64)
            return CellVisits(e, np.zeros((0, 2), np.int64), e, np.zeros(0), e)
        norm12 = np.abs(P[:, :, 0]) + np.abs(P[:, :, 1])
        near = (np.abs(norm12 - S * t[None, :]) <= math.sqrt(2) * c + 1) & (norm12 <= R + 2 * c)
        if self.params.dim > 2:
            near &= np.sum(P[:, :, 2:] ** 2, axis=2) <= c * c
        pid, m = np.nonzero(near)
        y = P[pid, m]
        base = np.floor(y[:, :2]).astype(np.int64)
        off = np.array([(i, j) for i in range(-1, 3) for j in range(-1, 3)])
        cand = base[:, None, :] + off[None, :, :]
        diff = y[:, None, :2] - cand
        d2 = np.sum(diff ** 2, axis=2)
        if self.params.dim > 2:
            d2 = d2 + np.sum(y[:, 2:] ** 2, axis=1)[:, None]
        lvl = np.abs(cand[:, :, 0]) + np.abs(cand[:, :, 1])
        tm = t[m][:, None]
        ok = ((d2 <= c * c) & (lvl <= R)
              & (level_start(lvl, S) <= tm) & (tm <= level_end(lvl, S)))
        r, o = np.nonzero(ok)
        pid_v, m_v = pid[r], m[r]
        xy = cand[r, o]
        lv = lvl[r, o]
        order = np.lexsort((xy[:, 1], xy[:, 0], lv, m_v, pid_v))
        return CellVisits(pid_v[order], xy[order], lv[order], t[m_v[order]], m_v[order])


ParticleRealization = Union[LatticeRealization, BrownianRealization]


def sample_initial_cloud(params: ModelParams, window: SimulationWindow, seed: int
                         ) -> ParticleRealization:
    """Poisson cloud of intensity ``params.lam`` on the buffered box."""
    if params.lam < 0:
        raise ValueError("intensity must be >= 0")
    if window.mode != params.mode or window.dim != params.dim:
        raise ValueError("window does not match the model parameters")
    rng = stream(seed, _CLOUD)
    lo, hi = window.sampling_box()
    if params.mode == LATTICE:
        volume = float(np.prod(hi - lo + 1))
        n = rng.poisson(params.lam * volume)
        start = rng.integers(lo, hi + 1, size=(n, params.dim)).astype(np.int64)
        marks = rng.random(n)
        return LatticeRealization(params, window, seed, start, marks, params.lam)
    volume = float(np.prod(hi - lo))
    n = rng.poisson(params.lam * volume)
    start = rng.uniform(lo, hi, size=(n, params.dim))
    marks = rng.random(n)
    return BrownianRealization(params, window, seed, start, marks, params.lam)


def _plane_excess(x: np.ndarray, radius: int) -> np.ndarray:
    """l1 distance from integer points to the plane diamond of given radius."""
    d = np.maximum(np.abs(x[:, 0]) + np.abs(x[:, 1]) - radius, 0)
    if x.shape[1] > 2:
        d = d + np.abs(x[:, 2:]).sum(axis=1)
    return d


def evolve_lattice_walks(realization: LatticeRealization, prune: bool = True
                         ) -> LatticeRealization:
    """Give every particle a continuous-time random walk history up to the horizon.

    Jumps happen at rate ``jump_rate`` and go to a uniform nearest neighbour.
    Given the jump count, jump times are uniform order statistics, drawn as
    normalised exponential spacings.  With ``prune`` the particles that
    cannot reach the certified region are dropped.
    """
    r = realization
    if r.params.mode != LATTICE:
        raise ValueError("lattice walks need a lattice realization")
    H = r.window.horizon
    d = r.params.dim
    rng = stream(r.seed, _WALKS)
    start, marks = r.start, r.marks
    N = rng.poisson(r.params.jump_rate * H, len(start)) if H > 0 else np.zeros(len(start), np.int64)
    if prune:
        keep = N >= _plane_excess(start, r.window.region_radius)
        start, marks, N = start[keep], marks[keep], N[keep]
    n = len(start)
    offsets = np.concatenate([[0], np.cumsum(N)]).astype(np.int64)
    K = int(N.max()) if n else 0
    if K == 0:
        return LatticeRealization(r.params, r.window, r.seed, start, marks, r.base_lam,
                                  offsets, np.zeros(0), np.zeros((0, d), np.int64))
    gaps = rng.exponential(size=(n, K + 1))
    cs = np.cumsum(gaps, axis=1)
    total = cs[np.arange(n), N]
    t = H * cs[:, :K] / total[:, None]
    mask = np.arange(K)[None, :] < N[:, None]
    dirs = rng.integers(0, 2 * d, size=(n, K))
    steps = np.zeros((n, K, d), np.int32)
    sign = (1 - 2 * (dirs % 2)).astype(np.int32) * mask
    np.put_along_axis(steps, (dirs // 2)[:, :, None], sign[:, :, None], axis=2)
    pos = start[:, None, :] + np.cumsum(steps, axis=1)
    return LatticeRealization(r.params, r.window, r.seed, start, marks, r.base_lam,
                              offsets, t[mask], pos[mask].astype(np.int64))


def _chunk_rows(steps: int, dim: int, budget: int = 2_000_000) -> int:
    return max(1, budget // max(1, (steps + 1) * dim))


def evolve_brownian(realization: BrownianRealization, step_dt: float, prune: bool = True
                    ) -> BrownianRealization:
    """Standard Brownian paths sampled on the grid ``0, dt, 2 dt, ...``.

    Positions at grid times are exact Brownian marginals.  With ``prune`` the
    particles whose sampled path never comes within a cell radius of the
    certified region are dropped.
    """
    r = realization
    if r.params.mode != CONTINUUM:
        raise ValueError("Brownian paths need a continuum realization")
    if not step_dt > 0:
        raise ValueError("step_dt must be > 0")
    H = r.window.horizon
    steps = int(math.floor(H / step_dt + 1e-9))
    d = r.params.dim
    rng = stream(r.seed, _WALKS)
    R = r.window.region_radius
    kept_paths, kept_idx = [], []
    chunk = _chunk_rows(steps, d)
    sd = math.sqrt(step_dt)
    for lo in range(0, len(r.start), chunk):
        x0 = r.start[lo:lo + chunk]
        inc = rng.normal(0.0, sd, size=(len(x0), steps, d))
        p = np.empty((len(x0), steps + 1, d))
        p[:, 0] = x0
        np.cumsum(inc, axis=1, out=p[:, 1:])
        p[:, 1:] += x0[:, None, :]
        if prune:
            ex = np.maximum(np.abs(p[..., 0]) + np.abs(p[..., 1]) - R, 0) / math.sqrt(2)
            if d > 2:
                ex = np.sqrt(ex ** 2 + np.sum(p[..., 2:] ** 2, axis=2))
            keep = np.any(ex <= CELL_RADIUS, axis=1)
            p = p[keep]
            kept_idx.append(lo + np.flatnonzero(keep))
        else:
            kept_idx.append(lo + np.arange(len(x0)))
        kept_paths.append(p)
    idx = np.concatenate(kept_idx) if kept_idx else np.zeros(0, np.int64)
    path = np.concatenate(kept_paths) if kept_paths else np.zeros((0, steps + 1, d))
    return BrownianRealization(r.params, r.window, r.seed, r.start[idx], r.marks[idx],
                               r.base_lam, step_dt, path)


def sample_realization(params: ModelParams, window: SimulationWindow, seed: int,
                       step_dt: float = 0.01, prune: bool = True) -> ParticleRealization:
    cloud = sample_initial_cloud(params, window, seed)
    if params.mode == LATTICE:
        return evolve_lattice_walks(cloud, prune=prune)
    return evolve_brownian(cloud, step_dt, prune=prune)


def realization_from_histories(params: ModelParams, window: SimulationWindow, start,
                               histories=None, marks=None, seed: int = 0
                               ) -> LatticeRealization:
    """Lattice realization with hand-specified particles.

    ``histories[k]`` is a list of ``(time, site)`` jumps of particle ``k``
    (times increasing, inside ``(0, horizon]``).  Missing histories mean the
    particle never moves.
    """
    start = np.asarray(start, dtype=np.int64).reshape(-1, params.dim)
    n = len(start)
    histories = list(histories) if histories is not None else []
    histories += [[]] * (n - len(histories))
    counts = np.array([len(h) for h in histories], dtype=np.int64)
    times = np.array([float(t) for h in histories for t, _ in h], dtype=float)
    pos = np.array([list(s) for h in histories for _, s in h], dtype=np.int64).reshape(-1, params.dim)
    for h in histories:
        ts = [t for t, _ in h]
        if any(b <= a for a, b in zip(ts, ts[1:])) or any(not 0 < t <= window.horizon for t in ts):
            raise ValueError("jump times must be increasing and inside (0, horizon]")
    marks = np.zeros(n) if marks is None else np.asarray(marks, dtype=float)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return LatticeRealization(params, window, seed, start, marks, params.lam, offsets, times, pos)


def positions_at(realization: ParticleRealization, time: float) -> np.ndarray:
    """Particle positions at ``time`` (right-continuous at jump instants)."""
    r = realization
    if not 0 <= time <= r.window.horizon * (1 + 1e-12):
        raise ValueError(f"time {time} outside [0, {r.window.horizon}]")
    if isinstance(r, BrownianRealization):
        m = time / r.step_dt
        mi = int(round(m))
        if abs(m - mi) > 1e-9 or mi >= r.path.shape[1]:
            raise ValueError(f"time {time} is not on the sampling grid")
        return r.path[:, mi].copy()
    if not r.evolved:
        return r.start.copy()
    pid = np.repeat(np.arange(r.n_particles), np.diff(r.offsets))
    done = np.bincount(pid[r.times <= time], minlength=r.n_particles)
    idx = r.offsets[:-1] + done - 1
    out = r.start.copy()
    moved = done > 0
    out[moved] = r.positions[idx[moved]]
    return out


def occupancy(realization: ParticleRealization, site, interval: tuple,
              radius: Optional[float] = None) -> bool:
    """Whether some particle touches ``site`` during the closed ``interval``.

    On the lattice this means sitting at the site; in the continuum it means
    being within ``radius`` (default: the cell radius) of it at a grid time.
    """
    r = realization
    t0, t1 = interval
    site = tuple(int(c) for c in site)
    r.window.require(site, t0, t1)
    if isinstance(r, BrownianRealization):
        rad = CELL_RADIUS if radius is None else radius
        t = r.grid_times
        cols = np.flatnonzero((t >= t0) & (t <= t1))
        if len(cols) == 0 or r.n_particles == 0:
            return False
        diff = r.path[:, cols] - np.asarray(site, float)
        return bool(np.any(np.sum(diff ** 2, axis=2) <= rad * rad))
    res = r.residences
    at = np.all(res.pos == np.asarray(site), axis=1)
    return bool(np.any(at & (res.a <= t1) & (res.b >= t0)))


def save_realization(realization: ParticleRealization, path) -> None:
    r = realization
    header = dict(format_version=FORMAT_VERSION, kind=type(r).__name__,
                  params=dict(lam=r.params.lam, speed=r.params.speed, dim=r.params.dim,
                              mode=r.params.mode, jump_rate=r.params.jump_rate),
                  window=dict(dim=r.window.dim, region_radius=r.window.region_radius,
                              horizon=r.window.horizon, buffer_radius=r.window.buffer_radius,
                              epsilon_truncation=r.window.epsilon_truncation,
                              mode=r.window.mode),
                  seed=int(r.seed), base_lam=r.base_lam)
    arrays = dict(start=r.start, marks=r.marks)
    if isinstance(r, LatticeRealization) and r.evolved:
        arrays.update(offsets=r.offsets, times=r.times, positions=r.positions)
    if isinstance(r, BrownianRealization) and r.evolved:
        header["step_dt"] = r.step_dt
        arrays.update(path=r.path)
    with open(path, "wb") as fh:
        np.savez_compressed(fh, header=np.frombuffer(json.dumps(header).encode(), np.uint8),
                            **arrays)


def load_realization(path) -> ParticleRealization:
    with np.load(path) as z:
        header = json.loads(z["header"].tobytes().decode())
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported realization format {header.get('format_version')}")
        params = ModelParams(**header["params"])
        window = SimulationWindow(**header["window"])
        common = (params, window, header["seed"], z["start"], z["marks"], header["base_lam"])
        if header["kind"] == "LatticeRealization":
            if "offsets" in z:
                return LatticeRealization(*common, z["offsets"], z["times"], z["positions"])
            return LatticeRealization(*common)
        if "path" in z:
            return BrownianRealization(*common, header["step_dt"], z["path"])
        return BrownianRealization(*common)
