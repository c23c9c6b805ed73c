"""Last exit from the space-time cone, influence regions, and lemma oracles.

For a walk started at the origin, ``tau`` is the last time it sits outside
the open cone ``{|y|_2 < delta t}`` and ``chi`` the largest distance it
reaches up to ``tau``.  A particle that first enters the cell system at
``(j, t_j)`` can afterwards only touch cells inside ``B(j, chi)``, which is
what makes the blocked field ``Y`` a lower bound for the vacancy field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import dynamics as dyn
from .model import CONTINUUM, CONTINUUM_MARGIN, LATTICE, ModelParams, as_site, level_end, level_sites, plane_sites
from .stats import derive_seed, poisson_tail, stream

DEFAULT_CHI_HORIZON = 200.0


@dataclass(frozen=True)
class ChiSample:
    tau: float
    chi: float
    censored: bool = False


def tau_chi(times: Sequence[float], positions, delta: float,
            horizon: float = math.inf) -> ChiSample:
    """Exact ``tau`` and ``chi`` of a piecewise-constant walk from the origin.

    ``positions[m]`` is the position from ``times[m]`` on.  A residence at
    ``p`` over ``[a, b]`` violates the cone up to ``min(b, |p|/delta)``.
    The left limit at ``tau`` is included in ``chi``.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    times = np.asarray(times, dtype=float)
    pos = np.asarray(positions, dtype=float).reshape(len(times), -1) if len(times) else np.zeros((0, 1))
    a = np.concatenate([[0.0], times])
    b = np.concatenate([times, [horizon]])
    r = np.concatenate([[0.0], np.sqrt(np.sum(pos ** 2, axis=1))])
    lim = r / delta
    viol = a <= lim
    tau = float(np.max(np.minimum(b, lim)[viol]))
    chi = float(np.max(r[a <= tau]))
    censored = bool(math.isfinite(horizon) and lim[-1] >= horizon)
    return ChiSample(tau, chi, censored)


@dataclass
class ChiSampleSet:
    tau: np.ndarray
    chi: np.ndarray
    censored: np.ndarray
    horizon: float
    delta: float
    discretized: bool = False

    def __len__(self):
        return len(self.tau)

    def __getitem__(self, i) -> ChiSample:
        return ChiSample(float(self.tau[i]), float(self.chi[i]), bool(self.censored[i]))

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean()) if len(self) else 0.0

    def uncensored_chi(self) -> np.ndarray:
        return self.chi[~self.censored]


def _chi_batch_lattice(n, delta, horizon, rate, dim, rng):
    N = rng.poisson(rate * horizon, n)
    K = int(N.max()) if n else 0
    if K == 0:
        z = np.zeros(n)
        return z, z.copy(), np.zeros(n, bool)
    gaps = rng.exponential(size=(n, K + 1))
    cs = np.cumsum(gaps, axis=1)
    t = horizon * cs[:, :K] / cs[np.arange(n), N][:, None]
    mask = np.arange(K)[None, :] < N[:, None]
    dirs = rng.integers(0, 2 * dim, size=(n, K))
    steps = np.zeros((n, K, dim), np.int32)
    sign = (1 - 2 * (dirs % 2)).astype(np.int32) * mask
    np.put_along_axis(steps, (dirs // 2)[:, :, None], sign[:, :, None], axis=2)
    r = np.sqrt(np.sum(np.cumsum(steps, axis=1).astype(float) ** 2, axis=2))
    b = np.empty_like(t)
    b[:, :-1] = t[:, 1:]
    b[:, -1] = horizon
    b = np.where(np.arange(K)[None, :] + 1 < N[:, None], b, horizon)
    lim = r / delta
    viol = mask & (t <= lim)
    tau = np.max(np.where(viol, np.minimum(b, lim), 0.0), axis=1)
    chi = np.max(np.where(mask & (t <= tau[:, None]), r, 0.0), axis=1)
    last_r = r[np.arange(n), np.maximum(N - 1, 0)] * (N > 0)
    return tau, chi, last_r / delta >= horizon


def _chi_batch_brownian(n, delta, horizon, dt, dim, rng):
    steps = int(math.floor(horizon / dt + 1e-9))
    inc = rng.normal(0.0, math.sqrt(dt), size=(n, steps, dim))
    r = np.empty((n, steps + 1))
    r[:, 0] = 0.0
    r[:, 1:] = np.sqrt(np.sum(np.cumsum(inc, axis=1) ** 2, axis=2))
    t = np.arange(steps + 1) * dt
    viol = r >= delta * t[None, :]
    last = steps - np.argmax(viol[:, ::-1], axis=1)
    tau = t[last]
    chi = np.max(np.where(np.arange(steps + 1)[None, :] <= last[:, None], r, 0.0), axis=1)
    return tau, chi, last == steps


def sample_chi(params: ModelParams, trials: int, horizon: float = DEFAULT_CHI_HORIZON,
               seed: int = 0, delta: Optional[float] = None, step_dt: float = 0.01
               ) -> ChiSampleSet:
    """Independent ``(tau, chi)`` draws of walks (or Brownian paths) from the origin."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dl = params.delta if delta is None else float(delta)
    rng = stream(seed, 7)
    taus, chis, cens = [], [], []
    if params.mode == LATTICE:
        chunk = max(1, 4_000_000 // max(1, int(params.jump_rate * horizon * 1.5 + 20)))
        fn = lambda m: _chi_batch_lattice(m, dl, horizon, params.jump_rate, params.dim, rng)  # noqa: E731
    else:
        steps = int(horizon / step_dt) + 1
        chunk = max(1, 4_000_000 // (steps * params.dim))
        fn = lambda m: _chi_batch_brownian(m, dl, horizon, step_dt, params.dim, rng)  # noqa: E731
    for lo in range(0, trials, chunk):
        t, c, z = fn(min(chunk, trials - lo))
        taus.append(t)
        chis.append(c)
        cens.append(z)
    return ChiSampleSet(np.concatenate(taus), np.concatenate(chis), np.concatenate(cens),
                        float(horizon), dl, params.mode == CONTINUUM)


@lru_cache(maxsize=16)
def chi_bank(dim: int, speed: float, mode: str = LATTICE, jump_rate: float = 1.0) -> np.ndarray:
    """Cached empirical sample of ``chi`` used for phantom particles."""
    params = ModelParams(0.0, speed, dim, mode, jump_rate)
    if mode == LATTICE:
        s = sample_chi(params, 20_000, DEFAULT_CHI_HORIZON, seed=0x5EED)
    else:
        s = sample_chi(params, 2_000, 2 * DEFAULT_CHI_HORIZON, seed=0x5EED, step_dt=0.05)
    return s.chi.copy()


@dataclass(frozen=True)
class TailFit:
    rate: float
    intercept: float
    residual: float
    x: np.ndarray = field(repr=False)
    log_survival: np.ndarray = field(repr=False)
    max_residual: float = 0.5

    @property
    def slope(self) -> float:
        return -self.rate

    @property
    def exponential(self) -> bool:
        """Whether the tail is consistent with an exponential law."""
        return self.rate > 0 and self.residual <= self.max_residual


def fit_exponential_tail(samples, x_min: float, x_max: Optional[float] = None,
                         n_points: int = 41, min_tail: int = 100,
                         max_residual: float = 0.5) -> TailFit:
    """Least-squares line through the log empirical survival ``P(X >= x)``.

    The fit runs over ``[x_min, x_max]`` cut where the survival drops below
    ``10 / len(samples)``.  ``rate`` is the negated slope and ``residual``
    the largest absolute deviation in log space.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0 or np.count_nonzero(x >= x_min) < min_tail:
        raise ValueError(f"need at least {min_tail} samples above x_min={x_min}")
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: all values equal")
    floor = 10.0 / n
    # largest x with survival >= floor
    x_end = x[n - int(math.ceil(floor * n))]
    if x_max is not None:
        x_end = min(x_end, x_max)
    if not x_end > x_min:
        raise ValueError("not enough tail mass above x_min")
    grid = np.linspace(x_min, x_end, n_points)
    surv = (n - np.searchsorted(x, grid, side="left")) / n
    ok = surv > 0
    grid, surv = grid[ok], surv[ok]
    if len(np.unique(surv)) < 3:
        raise ValueError("degenerate survival curve; cannot fit a tail")
    ls = np.log(surv)
    slope, intercept = np.polyfit(grid, ls, 1)
    resid = float(np.max(np.abs(ls - (slope * grid + intercept))))
    return TailFit(float(-slope), float(intercept), resid, grid, ls, max_residual)


@dataclass(frozen=True)
class InfluenceRegion:
    """Blocking neighbourhood of a site built from ``m_dominating`` chi draws."""

    center: tuple
    L: Optional[float]
    m_dominating: int
    hits: tuple = ()          # (t_j, chi_j) of particles that really entered here
    phantom_chis: tuple = ()
    mode: str = LATTICE
    level: int = 0

    @property
    def empty(self) -> bool:
        return self.m_dominating == 0

    @property
    def half_width(self) -> float:
        if self.empty:
            return -math.inf
        return self.L + (CONTINUUM_MARGIN if self.mode == CONTINUUM else 0.0)

    @property
    def ball_radius(self) -> float:
        return self.half_width

    @property
    def circumradius(self) -> float:
        return 0.0 if self.empty else math.sqrt(2.0) * self.half_width

    def square_bounds(self) -> Optional[tuple]:
        """Integer plane bounds ``(lo, hi)`` of ``Q``, inclusive, or None."""
        if self.empty:
            return None
        w = math.floor(self.half_width + 1e-12)
        c = np.array(self.center[:2])
        return c - w, c + w

    def square_sites(self) -> list:
        if self.empty:
            return []
        lo, hi = self.square_bounds()
        pad = self.center[2:]
        return [(x, y) + pad for x in range(lo[0], hi[0] + 1) for y in range(lo[1], hi[1] + 1)]

    def ball_sites(self) -> list:
        if self.empty:
            return []
        r2 = self.ball_radius ** 2
        cx, cy = self.center[:2]
        return [s for s in self.square_sites() if (s[0] - cx) ** 2 + (s[1] - cy) ** 2 <= r2 + 1e-9]

    def cylinders(self, delta: float) -> list:
        """``(radius, t_from, t_to)`` of the space-time cylinder of every real hit."""
        return [(chi, t, t + chi / delta) for t, chi in self.hits]


def build_influence_region(center, hits: Sequence[tuple], m_dominating: int,
                           params: ModelParams, extra_chis: Optional[Sequence[float]] = None,
                           rng: Optional[np.random.Generator] = None) -> InfluenceRegion:
    """Region of ``center`` from its real hits plus phantom draws up to ``m_dominating``.

    Phantom chis are taken from ``extra_chis`` when given, otherwise drawn
    from the cached chi bank with ``rng``.
    """
    center = as_site(center, params.dim)
    hits = tuple((float(t), float(c)) for t, c in hits)
    if m_dominating < len(hits):
        raise ValueError("m_dominating must be at least the number of real hits")
    n_extra = m_dominating - len(hits)
    if extra_chis is None:
        if n_extra and rng is None:
            raise ValueError("need extra_chis or an rng for phantom draws")
        bank = chi_bank(params.dim, params.speed, params.mode, params.jump_rate) if n_extra else None
        extra = tuple(float(v) for v in bank[rng.integers(0, len(bank), n_extra)]) if n_extra else ()
    else:
        extra = tuple(float(v) for v in extra_chis)
        if len(extra) != n_extra:
            raise ValueError(f"expected {n_extra} extra chis, got {len(extra)}")
    chis = [c for _, c in hits] + list(extra)
    L = max(chis) if chis else None
    return InfluenceRegion(center, L, int(m_dominating), hits, extra, params.mode,
                           int(abs(center[0]) + abs(center[1])))


class Entries(NamedTuple):
    """First entry of each particle into the cell system, with its cone data."""
    pid: np.ndarray
    xy: np.ndarray
    level: np.ndarray
    t_enter: np.ndarray
    tau: np.ndarray
    chi: np.ndarray
    censored: np.ndarray
    marks: np.ndarray


def _segment_starts(ids: np.ndarray) -> np.ndarray:
    return np.concatenate([[0], np.flatnonzero(ids[1:] != ids[:-1]) + 1])


def particle_entries(realization, delta: Optional[float] = None) -> Entries:
    """Entry cell, entry time and the realized ``(tau, chi)`` after entry.

    On the lattice the cone is anchored at the entry site; in the continuum
    at the particle's actual entry point.  ``tau`` is clipped at the horizon
    (then ``censored``), which is harmless for blocking inside the window.
    """
    r = realization
    dl = r.params.delta if delta is None else delta
    v = r.cell_visits
    if len(v.pid) == 0:
        e = np.zeros(0)
        ei = np.zeros(0, np.int64)
        return Entries(ei, np.zeros((0, 2), np.int64), ei, e, e, e, np.zeros(0, bool), e)
    first = _segment_starts(v.pid)
    pid = v.pid[first]
    xy = v.xy[first]
    lvl = v.level[first]
    t0 = v.t_enter[first]
    if isinstance(r, dyn.LatticeRealization):
        res = r.residences
        entry_row = np.full(r.n_particles, np.iinfo(np.int64).max)
        entry_row[pid] = v.row[first]
        rows = np.flatnonzero(np.arange(len(res.pid)) >= entry_row[res.pid])
        rp = res.pid[rows]
        slot = np.zeros(r.n_particles, np.int64)
        slot[pid] = np.arange(len(pid))
        k = slot[rp]
        anchor = np.zeros((len(pid), r.params.dim))
        anchor[:, :2] = xy
        rel = res.pos[rows] - anchor[k]
        rad = np.sqrt(np.sum(rel ** 2, axis=1))
        a = np.maximum(res.a[rows], t0[k]) - t0[k]
        b = res.b[rows] - t0[k]
        lim = rad / dl
        viol = a <= lim
        starts = _segment_starts(rp)
        tau = np.maximum.reduceat(np.where(viol, np.minimum(b, lim), -np.inf), starts)
        chi = np.maximum.reduceat(np.where(a <= tau[k], rad, 0.0), starts)
        is_last = np.concatenate([rp[1:] != rp[:-1], [True]])
        cens_rows = is_last & viol & (lim >= b)
        censored = np.logical_or.reduceat(cens_rows, starts)
    else:
        dt = r.step_dt
        m0 = v.row[first]
        tau = np.empty(len(pid))
        chi = np.empty(len(pid))
        censored = np.empty(len(pid), bool)
        for i, (p, m) in enumerate(zip(pid, m0)):
            seg = r.path[p, m:]
            rad = np.sqrt(np.sum((seg - seg[0]) ** 2, axis=1))
            s = np.arange(len(seg)) * dt
            viol = np.flatnonzero(rad >= dl * s)
            last = viol[-1]
            tau[i] = s[last]
            chi[i] = rad[: last + 1].max()
            censored[i] = last == len(seg) - 1
    return Entries(pid, xy, lvl, t0, tau, chi, censored, r.marks[pid])


def regions_from_realization(realization, depth: int, c_hat: float,
                             phantom_seed: Optional[int] = None,
                             entries: Optional[Entries] = None) -> list:
    """Influence regions of every site up to ``depth`` (non-empty ones only).

    Real hits come from the realization's particle entries.  Every site also
    gets ``Poisson(c_hat * base_lam)`` phantom draws, each kept with the same
    mark rule as particles, so thinned realizations see nested phantoms.
    """
    r = realization
    params = r.params
    ent = particle_entries(r) if entries is None else entries
    keep = ent.level <= depth
    seed = derive_seed(r.seed, 0xB10C) if phantom_seed is None else phantom_seed
    rng = stream(seed, 3)
    sites = plane_sites(depth)
    n_sites = len(sites)
    counts = rng.poisson(max(c_hat, 0.0) * r.base_lam, n_sites)
    total = int(counts.sum())
    marks = rng.random(total)
    bank = chi_bank(params.dim, params.speed, params.mode, params.jump_rate) if total else None
    pchi = bank[rng.integers(0, len(bank), total)] if total else np.zeros(0)
    kept = marks < (params.lam / r.base_lam if r.base_lam > 0 else 0.0)
    owner = np.repeat(np.arange(n_sites), counts)[kept]
    pchi = pchi[kept]
    by_site: dict = {}
    for x, y, t, c in zip(ent.xy[keep, 0], ent.xy[keep, 1], ent.t_enter[keep], ent.chi[keep]):
        by_site.setdefault((int(x), int(y)), [[], []])[0].append((float(t), float(c)))
    for o, c in zip(owner, pchi):
        s = (int(sites[o, 0]), int(sites[o, 1]))
        by_site.setdefault(s, [[], []])[1].append(float(c))
    pad = (0,) * (params.dim - 2)
    regions = []
    for s in sorted(by_site):
        hits, extra = by_site[s]
        regions.append(build_influence_region(s + pad, hits, len(hits) + len(extra), params,
                                              extra_chis=extra))
    return regions


@lru_cache(maxsize=16)
def default_c_hat(dim: int, speed: float, mode: str = LATTICE, jump_rate: float = 1.0) -> float:
    """Quick estimate of the entry-count constant, used when none is supplied."""
    params = ModelParams(1.0, speed, dim, mode, jump_rate)
    rep = lemma_n_count(params, 4, trials=200 if mode == LATTICE else 40, seed=0xC0FFEE)
    return rep.c_hat


# Lemma oracles ----------------------------------------------------------------


@dataclass
class PsiReport:
    k: int
    lam: float
    trials: int
    probe_sites: list
    means: np.ndarray
    se: np.ndarray
    far_site: tuple
    far_mean: float
    far_se: float
    pair: tuple
    correlation: float

    @property
    def bound_ok(self) -> bool:
        return bool(np.all(self.means <= self.lam + 3 * self.se + 1e-12))

    @property
    def correlation_ok(self) -> bool:
        return bool(abs(self.correlation) <= 3.0 / math.sqrt(self.trials))

    @property
    def far_ok(self) -> bool:
        return bool(abs(self.far_mean - self.lam) <= 3 * self.far_se + 1e-12)

    @property
    def passed(self) -> bool:
        return self.bound_ok and self.correlation_ok and self.far_ok

    @property
    def max_mean(self) -> float:
        return float(self.means.max()) if len(self.means) else 0.0


def _site_codes(xy: np.ndarray, span: int) -> np.ndarray:
    return (xy[:, 0] + span) * (2 * span + 1) + (xy[:, 1] + span)


def lemma_psi_intensity(params: ModelParams, k: int, trials: int, seed: int,
                        probe_radius: Optional[int] = None, far_offset: int = 10) -> PsiReport:
    """Intensity of the particles that avoided all cells below level ``k``.

    Counts, at time ``k / S``, such particles on every probe site (plane
    sites with l1 norm up to ``probe_radius``, default ``k + 2``) and on a
    far site ``(k + far_offset, 0)`` that no walk can reach from the cells in
    time.  Counts at ``(k, 0)`` and ``(0, k)`` give the independence check.
    """
    if params.mode != LATTICE:
        raise ValueError("the Psi intensity oracle is defined for the lattice model")
    if k < 1:
        raise ValueError("k must be >= 1")
    pr = k + 2 if probe_radius is None else probe_radius
    far = (k + far_offset, 0)
    radius = max(pr, far[0])
    window = dyn.make_window(params, radius, horizon=k / params.speed)
    probes = plane_sites(pr)
    span = radius + 1
    codes = np.concatenate([_site_codes(probes, span), _site_codes(np.array([far]), span)])
    lookup = {int(c): i for i, c in enumerate(codes)}
    n_probe = len(codes)
    pair = (lookup[int(_site_codes(np.array([[k, 0]]), span)[0])],
            lookup[int(_site_codes(np.array([[0, k]]), span)[0])])
    s1 = np.zeros(n_probe)
    s2 = np.zeros(n_probe)
    cross = 0.0
    for trial in range(trials):
        real = dyn.sample_realization(params, window, derive_seed(seed, trial))
        v = real.cell_visits
        gone = np.unique(v.pid[v.level < k])
        alive = np.ones(real.n_particles, bool)
        alive[gone] = False
        pos = dyn.positions_at(real, k / params.speed)[alive]
        if params.dim > 2:
            pos = pos[np.all(pos[:, 2:] == 0, axis=1)]
        pos = pos[np.all(np.abs(pos[:, :2]) <= radius, axis=1)]
        c = _site_codes(pos[:, :2], span)
        idx = np.array([lookup.get(int(x), -1) for x in c], dtype=np.int64)
        cnt = np.bincount(idx[idx >= 0], minlength=n_probe).astype(float)
        s1 += cnt
        s2 += cnt ** 2
        cross += cnt[pair[0]] * cnt[pair[1]]
    n = float(trials)
    mean = s1 / n
    var = np.maximum(s2 / n - mean ** 2, 0.0) * n / max(n - 1, 1)
    se = np.sqrt(var / n)
    cov = cross / n - mean[pair[0]] * mean[pair[1]]
    sd = math.sqrt(var[pair[0]] * var[pair[1]])
    corr = cov / sd if sd > 0 else 0.0
    pad = (0,) * (params.dim - 2)
    return PsiReport(k, params.lam, trials, [tuple(int(v) for v in p) + pad for p in probes],
                     mean[:-1], se[:-1], far + pad, float(mean[-1]), float(se[-1]),
                     (tuple(int(v) for v in (k, 0)) + pad, (0, k) + pad), float(corr))


@dataclass
class NCountReport:
    k: int
    lam: float
    trials: int
    sites: list
    counts: np.ndarray          # (trials, len(sites))
    ties: int
    thresholds: tuple = (1, 2, 3, 4, 5)

    @property
    def site_means(self) -> np.ndarray:
        return self.counts.mean(axis=0)

    @property
    def mean(self) -> float:
        return float(self.counts.mean()) if self.counts.size else 0.0

    @property
    def c_fit(self) -> float:
        """Mean count over all sites divided by the intensity."""
        return self.mean / self.lam if self.lam > 0 else 0.0

    @property
    def c_hat(self) -> float:
        """Largest per-site mean divided by the intensity (used for domination)."""
        if self.lam <= 0 or not self.counts.size:
            return 0.0
        return float(self.site_means.max() / self.lam)

    def domination(self) -> list:
        """Per threshold ``m``: worst excess of ``P(N_i >= m)`` over the Poisson tail."""
        out = []
        tail_mean = self.c_hat * self.lam
        n = self.counts.shape[0]
        for m in self.thresholds:
            p = (self.counts >= m).mean(axis=0)
            se = np.sqrt(p * (1 - p) / n)
            bound = float(poisson_tail(tail_mean, m)) if tail_mean > 0 else 0.0
            excess = p - (bound + 3 * se)
            out.append(dict(m=m, empirical=float(p.max()), poisson=bound,
                            worst_excess=float(excess.max()), ok=bool(np.all(excess <= 1e-12))))
        return out

    @property
    def passed(self) -> bool:
        return self.ties == 0 and all(d["ok"] for d in self.domination())


def lemma_n_count(params: ModelParams, k: int, trials: int, seed: int) -> NCountReport:
    """Number of particles entering level ``k`` through each of its sites.

    A particle counts for site ``i`` when its first cell is the cell of ``i``
    on level ``k``, which is the same as avoiding all lower levels and then
    reaching level ``k`` at ``i`` first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    window = dyn.make_window(params, k)
    sites = level_sites(k, 2)
    span = k + 1
    lookup = {int(c): i for i, c in enumerate(_site_codes(np.array(sites), span))}
    counts = np.zeros((trials, len(sites)), np.int64)
    ties = 0
    for trial in range(trials):
        real = dyn.sample_realization(params, window, derive_seed(seed, trial))
        v = real.cell_visits
        if len(v.pid) == 0:
            continue
        first = _segment_starts(v.pid)
        if len(v.pid) > 1:
            nxt = np.minimum(first + 1, len(v.pid) - 1)
            same = (v.pid[nxt] == v.pid[first]) & (nxt != first)
            ties += int(np.sum(same & (v.t_enter[nxt] == v.t_enter[first])
                               & (v.level[nxt] == k) & (v.level[first] == k)
                               & (params.mode == LATTICE)))
        at_k = first[v.level[first] == k]
        c = _site_codes(v.xy[at_k], span)
        idx = np.array([lookup[int(x)] for x in c], dtype=np.int64)
        counts[trial] = np.bincount(idx, minlength=len(sites))
    pad = (0,) * (params.dim - 2)
    return NCountReport(k, params.lam, trials, [s[:2] + pad for s in sites], counts, ties)


def certification_time(params: ModelParams, depth: int) -> float:
    """Time after which no cell up to ``depth`` exists."""
    return level_end(depth, params.speed)
