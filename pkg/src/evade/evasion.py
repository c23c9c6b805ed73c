"""Target trajectories, the speed constraint, strategies and detection.

A trajectory is a nearest-neighbour path on the plane, piecewise constant
and right-continuous: after the jump at time ``t`` the target is already at
the new site.  Detection uses closed intervals on both sides, so a particle
and the target sharing a site at a single instant counts as detection.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics as dyn
from .model import DETECTION_RADIUS, LATTICE, ModelParams, as_site, level_end
from .percolation import VacancyField, compute_vacancy_field, find_oriented_vacant_path

L1, L2 = "l1", "l2"


@dataclass(frozen=True)
class Trajectory:
    """Start site plus a list of ``(jump_time, new_site)`` moves."""

    start: tuple = (0, 0)
    moves: tuple = ()
    speed_cert: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "start", as_site(self.start))
        moves = tuple((float(t), as_site(s, len(self.start))) for t, s in self.moves)
        object.__setattr__(self, "moves", moves)

    @property
    def dim(self) -> int:
        return len(self.start)

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([t for t, _ in self.moves], dtype=float)

    def sites(self) -> list:
        return [self.start] + [s for _, s in self.moves]

    def position_at(self, t: float) -> tuple:
        """Right-continuous position at time ``t``."""
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.sites()[k]

    def residences(self, horizon: float) -> list:
        """``(site, arrival, departure)`` with closed intervals, clipped at ``horizon``."""
        out = []
        a, site = 0.0, self.start
        for t, nxt in self.moves:
            if t > horizon:
                break
            out.append((site, a, t))
            a, site = t, nxt
        out.append((site, a, horizon))
        return out

    def to_csv(self, path, horizon: Optional[float] = None) -> None:
        """Rows ``time, x, y``: the start plus every jump (and the horizon if given)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "x", "y"])
            w.writerow([0.0, self.start[0], self.start[1]])
            for t, s in self.moves:
                w.writerow([t, s[0], s[1]])
            if horizon is not None:
                s = self.position_at(horizon)
                w.writerow([horizon, s[0], s[1]])


@dataclass
class AdmissibilityReport:
    ok: bool
    kind: Optional[str] = None   # "continuity" or "speed"
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


def check_admissible(trajectory: Trajectory, speed: float, norm: str = L1,
                     tol: float = 1e-9) -> AdmissibilityReport:
    """Nearest-neighbour steps and ``|g(t') - g(t)| <= max(S (t' - t), 1)``.

    Windows are delimited by the start and the jump times; displacement only
    changes at jumps, so these windows are the binding ones.
    """
    if not speed > 0:
        raise ValueError("speed must be > 0")
    times = trajectory.jump_times
    if len(times) and (times[0] <= 0 or np.any(np.diff(times) <= 0)):
        raise ValueError("jump times must be positive and strictly increasing")
    pts = np.array(trajectory.sites(), dtype=float)
    steps = np.abs(np.diff(pts, axis=0)).sum(axis=1)
    bad = np.flatnonzero(steps != 1)
    if len(bad):
        m = int(bad[0])
        return AdmissibilityReport(False, "continuity",
                                   dict(time=float(times[m]), src=trajectory.sites()[m],
                                        dst=trajectory.sites()[m + 1]))
    ev = np.concatenate([[0.0], times])
    for p in range(len(ev) - 1):
        diff = pts[p + 1:] - pts[p]
        disp = np.abs(diff).sum(axis=1) if norm == L1 else np.sqrt((diff ** 2).sum(axis=1))
        xi = ev[p + 1:] - ev[p]
        allow = np.maximum(speed * xi, 1.0) + tol
        over = np.flatnonzero(disp > allow)
        if len(over):
            q = p + 1 + int(over[0])
            return AdmissibilityReport(False, "speed",
                                       dict(t0=float(ev[p]), t1=float(ev[q]), window=float(xi[over[0]]),
                                            displacement=float(disp[over[0]]),
                                            allowed=float(allow[over[0]] - tol)))
    return AdmissibilityReport(True)


@dataclass(frozen=True)
class DetectionOutcome:
    detected: bool
    time: float
    detecting_particle: Optional[int] = None
    discretized: bool = False

    @property
    def survived(self) -> bool:
        return not self.detected


def _site_codes(pos: np.ndarray) -> np.ndarray:
    pos = np.asarray(pos, dtype=np.int64)
    code = np.zeros(len(pos), np.int64)
    for k in range(pos.shape[1]):
        code = code * (1 << 20) + (pos[:, k] + (1 << 19))
    return code


def _clip(trajectory: Trajectory, horizon: float) -> Trajectory:
    if len(trajectory.moves) and trajectory.moves[-1][0] > horizon:
        warnings.warn("trajectory extends past the horizon; later moves ignored", stacklevel=3)
        return Trajectory(trajectory.start, tuple(m for m in trajectory.moves if m[0] <= horizon),
                          trajectory.speed_cert)
    return trajectory


def detection_time(trajectory: Trajectory, realization, horizon: Optional[float] = None,
                   radius: Optional[float] = None) -> DetectionOutcome:
    """First time a particle meets the target, or survival up to ``horizon``.

    Lattice: exact scan of closed residence-interval overlaps at equal sites.
    Continuum: centre distance at most ``radius`` (default 1) at grid times;
    at a target jump falling on a grid time both positions are checked.
    """
    r = realization
    H = r.window.horizon if horizon is None else float(horizon)
    if H > r.window.horizon * (1 + 1e-12):
        raise dyn.CertificationError(f"horizon {H} beyond realization horizon {r.window.horizon}")
    traj = _clip(trajectory, H)
    dim = r.params.dim
    traj_res = [(as_site(s, dim), a, b) for s, a, b in traj.residences(H)]
    for s, a, b in traj_res:
        r.window.require(s, a, b)
    if isinstance(r, dyn.BrownianRealization):
        return _detect_continuum(traj, traj_res, r, H, DETECTION_RADIUS if radius is None else radius)
    if r.n_particles == 0:
        return DetectionOutcome(False, H)
    res = r.residences
    codes = _site_codes(res.pos)
    tcodes = _site_codes(np.array([s for s, _, _ in traj_res]))
    rows = np.flatnonzero(np.isin(codes, tcodes))
    best, who = math.inf, None
    for (s, a, b), c in zip(traj_res, tcodes):
        sel = rows[codes[rows] == c]
        hit = sel[(res.a[sel] <= b) & (res.b[sel] >= a)]
        if len(hit):
            t = np.maximum(res.a[hit], a)
            i = int(np.argmin(t))
            if t[i] < best:
                best, who = float(t[i]), int(res.pid[hit[i]])
    if who is None:
        return DetectionOutcome(False, H)
    return DetectionOutcome(True, best, who)


def _detect_continuum(traj, traj_res, r, H, radius) -> DetectionOutcome:
    t = r.grid_times
    t = t[t <= H * (1 + 1e-12)]
    if r.n_particles == 0 or len(t) == 0:
        return DetectionOutcome(False, H, discretized=True)
    pts = np.array([s for s, _, _ in traj_res], dtype=float)
    # closed residences: every grid time inside [a, b] sees the target at that site
    best, who = math.inf, None
    for k, (s, a, b) in enumerate(traj_res):
        m = np.flatnonzero((t >= a) & (t <= b))
        if len(m) == 0:
            continue
        d2 = np.sum((r.path[:, m] - pts[k]) ** 2, axis=2)
        close = d2 <= radius * radius
        if close.any():
            cols = np.flatnonzero(close.any(axis=0))
            first = int(cols[0])
            if t[m[first]] < best:
                best, who = float(t[m[first]]), int(np.argmax(close[:, first]))
    if who is None:
        return DetectionOutcome(False, H, discretized=True)
    return DetectionOutcome(True, best, who, discretized=True)


# Strategies -------------------------------------------------------------------


def strategy_stationary(dim: int = 2) -> Trajectory:
    return Trajectory((0,) * dim)


def strategy_drift(velocity: float, speed: float, horizon: float, axis: int = 0,
                   dim: int = 2) -> Trajectory:
    """Straight line along ``+e_axis``, one unit jump every ``1 / velocity``."""
    if velocity < 0:
        raise ValueError("drift velocity must be >= 0")
    if velocity > speed * (1 + 1e-12):
        raise ValueError(f"drift velocity {velocity} exceeds the speed bound {speed}")
    if velocity == 0:
        return Trajectory((0,) * dim, (), speed)
    moves = []
    k = 1
    while k / velocity < horizon:
        site = [0] * dim
        site[axis] = k
        moves.append((k / velocity, tuple(site)))
        k += 1
    return Trajectory((0,) * dim, tuple(moves), speed)


def follow_path(path: list, speed: float) -> Trajectory:
    """Reside at ``path[j]`` during its cell interval and jump at the cell's end."""
    moves = tuple((level_end(j, speed), site) for j, site in enumerate(path[1:]))
    return Trajectory(path[0], moves, speed)


def strategy_percolation_follower(realization, depth: int,
                                  field: Optional[VacancyField] = None) -> Optional[Trajectory]:
    """Follow an oriented vacant path through the cells, or None if there is none.

    The strategy reads the whole realization.  Every cell it occupies is
    vacant, so it is undetected up to ``(depth + 1) / S``.
    """
    f = compute_vacancy_field(realization, depth) if field is None else field
    path = find_oriented_vacant_path(f, depth)
    if path is None:
        return None
    return follow_path(path, realization.params.speed)


def strategy_greedy(realization, lookahead: float, depth: int,
                    horizon: Optional[float] = None) -> Trajectory:
    """Every ``1 / S``, step to the option farthest from nearby particles.

    Options are the current site and its four plane neighbours, restricted to
    the diamond of radius ``depth``.  The score of a site is its distance to
    the nearest particle present during ``[t, t + lookahead]`` (l1 on the
    lattice, l2 in the continuum).  Ties prefer staying, then the
    lexicographically smallest site.
    """
    if lookahead < 0:
        raise ValueError("lookahead must be >= 0")
    r = realization
    params: ModelParams = r.params
    S = params.speed
    H = level_end(depth, S) if horizon is None else horizon
    dim = params.dim
    lattice = params.mode == LATTICE
    if lattice:
        res = r.residences
        near = np.abs(res.pos).sum(axis=1) <= depth + 1 + 2 * max(1.0, lookahead * S)
        pos, a, b = res.pos[near].astype(float), res.a[near], res.b[near]
    else:
        t_grid = r.grid_times
    cur = (0,) * dim
    moves = []
    m = 1
    while m / S < H:
        t = m / S
        if lattice:
            sel = (a <= t + lookahead) & (b >= t)
            cloud = pos[sel]
        else:
            cols = np.flatnonzero((t_grid >= t) & (t_grid <= t + lookahead))
            cloud = r.path[:, cols].reshape(-1, dim) if len(cols) else np.zeros((0, dim))
        opts = [cur] + sorted(
            (cur[0] + dx, cur[1] + dy) + cur[2:] for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if abs(cur[0] + dx) + abs(cur[1] + dy) <= depth)
        if len(cloud):
            diff = cloud[None, :, :] - np.array(opts, dtype=float)[:, None, :]
            dist = (np.abs(diff).sum(axis=2) if lattice else np.sqrt((diff ** 2).sum(axis=2))).min(axis=1)
            choice = opts[int(np.argmax(dist))]  # first maximum: stay, then lexicographic
        else:
            choice = cur
        if choice != cur:
            moves.append((t, choice))
            cur = choice
        m += 1
    return Trajectory((0,) * dim, tuple(moves), S)


STRATEGIES = ("stationary", "drift", "greedy", "percolation_follower")


def run_strategy(name: str, realization, depth: int, drift_speed: Optional[float] = None,
                 lookahead: float = 1.0) -> Optional[Trajectory]:
    """Dispatch a strategy by name; None means the strategy found no move plan."""
    p = realization.params
    if name == "stationary":
        return strategy_stationary(p.dim)
    if name == "drift":
        v = p.speed if drift_speed is None else drift_speed
        return strategy_drift(v, p.speed, level_end(depth, p.speed), dim=p.dim)
    if name == "greedy":
        return strategy_greedy(realization, lookahead, depth)
    if name in ("percolation_follower", "percolation"):
        return strategy_percolation_follower(realization, depth)
    raise ValueError(f"unknown strategy {name!r}; choose from {STRATEGIES}")
