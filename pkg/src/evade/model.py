"""Geometry and time structure of the evasion model.

Sites are plain tuples of ints of length ``dim``.  The target only ever
lives on the plane ``Z^2 x {0}^(d-2)``; every site of that plane owns a
space-time cell whose time interval is ``[|i|_1 / S, (|i|_1 + 1) / S]``.

Levels and adjacency use the l1 norm, cones and influence radii use l2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

LATTICE = "lattice"
CONTINUUM = "continuum"
MODES = (LATTICE, CONTINUUM)

#: radius of the ball around a plane site forming a continuum cell
CELL_RADIUS = 4.0 / 3.0
#: distance at which a particle detects the target in the continuum model
DETECTION_RADIUS = 1.0
#: ball radius outside of which a continuum cone provably avoids all cells
CONTINUUM_EXCLUSION = 5.0
#: margin added to influence radii in the continuum model
CONTINUUM_MARGIN = 10.0


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one model instance.

    ``lam`` is the particle intensity per site (per unit volume in the
    continuum), ``speed`` the target speed bound S.  ``jump_rate`` is the
    total jump rate of each walk; it only rescales time and exists so the
    lemma oracles can be exercised with faster walks.
    """

    lam: float
    speed: float
    dim: int = 2
    mode: str = LATTICE
    jump_rate: float = 1.0

    def __post_init__(self):
        if not (self.lam >= 0) or not math.isfinite(self.lam):
            raise ValueError(f"intensity must be finite and >= 0, got {self.lam}")
        if not (self.speed > 0) or not math.isfinite(self.speed):
            raise ValueError(f"speed must be finite and > 0, got {self.speed}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dim}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.jump_rate > 0):
            raise ValueError("jump_rate must be > 0")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def delta(self) -> float:
        """Cone slope S / (4 sqrt(d))."""
        return self.speed / (4.0 * math.sqrt(self.dim))

    def replace(self, **changes) -> "ModelParams":
        kw = dict(lam=self.lam, speed=self.speed, dim=self.dim, mode=self.mode,
                  jump_rate=self.jump_rate)
        kw.update(changes)
        return ModelParams(**kw)


def as_site(coords: Sequence[int], dim: Optional[int] = None) -> tuple:
    """Normalise ``coords`` to a tuple of ints, zero-padding to ``dim``."""
    site = tuple(int(c) for c in coords)
    if dim is not None:
        if len(site) > dim:
            raise ValueError(f"site {site} has more than {dim} coordinates")
        site = site + (0,) * (dim - len(site))
    return site


def l1(site) -> int:
    return int(sum(abs(int(c)) for c in site))


def in_hyperplane(site) -> bool:
    return all(int(c) == 0 for c in site[2:])


def level_start(k, speed):
    """Start of the time interval of any cell on level ``k``."""
    return k / speed


def level_end(k, speed):
    return (k + 1) / speed


@dataclass(frozen=True)
class Cell:
    site: tuple
    t_start: float
    t_end: float
    radius: float = 0.0  # 0 on the lattice, CELL_RADIUS in the continuum

    @property
    def level(self) -> int:
        return l1(self.site)

    def contains_time(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end


def cell_of(site, params: ModelParams) -> Cell:
    site = as_site(site, params.dim)
    if not in_hyperplane(site):
        raise ValueError(f"site {site} is not in the target plane")
    k = l1(site)
    radius = CELL_RADIUS if params.mode == CONTINUUM else 0.0
    return Cell(site, level_start(k, params.speed), level_end(k, params.speed), radius)


def level_sites(k: int, dim: int = 2, radius_cap: Optional[int] = None) -> list:
    """All plane sites with l1 norm ``k``, sorted lexicographically."""
    if k < 0:
        raise ValueError("level must be >= 0")
    pad = (0,) * (dim - 2)
    if k == 0:
        return [(0, 0) + pad]
    out = set()
    for x in range(-k, k + 1):
        rest = k - abs(x)
        for y in {rest, -rest}:
            if radius_cap is None or (abs(x) <= radius_cap and abs(y) <= radius_cap):
                out.add((x, y) + pad)
    return sorted(out)


_PLANE_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def oriented_successors(site) -> list:
    """Plane neighbours of ``site`` one l1 level further out."""
    site = as_site(site)
    if not in_hyperplane(site):
        raise ValueError(f"site {site} is not in the target plane")
    k = l1(site)
    out = []
    for dx, dy in _PLANE_STEPS:
        nxt = (site[0] + dx, site[1] + dy) + site[2:]
        if l1(nxt) == k + 1:
            out.append(nxt)
    return sorted(out)


@dataclass(frozen=True)
class Cone:
    """Open space-time cone ``{(y, s): s > t0, |y - x|_2 < delta (s - t0)}``."""

    apex_site: tuple
    apex_time: float
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("cone slope must be > 0")

    def contains(self, point, time) -> bool:
        return cone_contains(self, point, time)


def cone_contains(cone: Cone, point, time: float) -> bool:
    dt = time - cone.apex_time
    if not dt > 0:
        return False
    diff = np.asarray(point, dtype=float) - np.asarray(cone.apex_site, dtype=float)
    return bool(math.sqrt(float(diff @ diff)) < cone.delta * dt)


def plane_sites(max_norm: int) -> np.ndarray:
    """(n, 2) array of plane coordinates with l1 norm <= ``max_norm``."""
    r = np.arange(-max_norm, max_norm + 1)
    x, y = np.meshgrid(r, r, indexing="ij")
    keep = np.abs(x) + np.abs(y) <= max_norm
    return np.stack([x[keep], y[keep]], axis=1)


@dataclass
class ConeCheckReport:
    passed: bool
    checks: int
    mode: str
    delta: float
    counterexample: Optional[dict] = None
    notes: list = field(default_factory=list)

    def __str__(self):
        if self.passed:
            return "pass"
        return f"fail: {self.counterexample}"


def verify_cone_disjointness(params: ModelParams, x_norm_max: int, j_norm_max: int,
                             t_samples: int = 16, delta: Optional[float] = None
                             ) -> ConeCheckReport:
    """Exhaustively check that cones launched from a cell miss all other cells.

    For every plane site ``x`` with ``|x|_1 <= x_norm_max`` and every time
    ``t`` on a ``t_samples`` grid over ``T_x`` (endpoints included), no
    other site ``j`` with ``|j|_1 <= j_norm_max`` may have a point of its
    cell inside the cone launched at ``(x, t)``.  Membership is monotone in
    the query time, so only the end of ``T_j`` needs checking.

    In continuum mode the launch point may be anywhere in ``B(x, 4/3)`` and
    only sites outside ``B(x, 5)`` are checked; the launch point closest to
    ``j`` is the worst case and is used directly.

    ``delta`` overrides the cone slope (for negative controls).
    """
    if x_norm_max > j_norm_max:
        raise ValueError("x_norm_max must not exceed j_norm_max")
    if t_samples < 2:
        raise ValueError("need at least the two endpoints of T_x")
    S = params.speed
    dl = params.delta if delta is None else float(delta)
    continuum = params.mode == CONTINUUM
    xs = plane_sites(x_norm_max)
    js = plane_sites(j_norm_max)
    j_norm = np.abs(js).sum(axis=1)
    j_end = level_end(j_norm, S)
    frac = np.linspace(0.0, 1.0, t_samples)
    checks = 0
    for x in xs:
        kx = int(abs(x[0]) + abs(x[1]))
        ts = level_start(kx, S) + frac * (level_end(kx, S) - level_start(kx, S))
        ts[-1] = level_end(kx, S)
        dist = np.hypot(js[:, 0] - x[0], js[:, 1] - x[1])
        if continuum:
            cand = dist > CONTINUUM_EXCLUSION
            gap = dist - CELL_RADIUS
        else:
            cand = (js[:, 0] != x[0]) | (js[:, 1] != x[1])
            gap = dist
        reach = dl * (j_end[None, :] - ts[:, None])
        bad = cand[None, :] & (j_end[None, :] > ts[:, None]) & (gap[None, :] < reach)
        checks += int(cand.sum()) * len(ts)
        if bad.any():
            ti, ji = np.argwhere(bad)[0]
            pad = (0,) * (params.dim - 2)
            ce = dict(x=tuple(int(v) for v in x) + pad, t=float(ts[ti]),
                      j=tuple(int(v) for v in js[ji]) + pad, s=float(j_end[ji]),
                      distance=float(dist[ji]), cone_radius=float(reach[ti, ji]))
            return ConeCheckReport(False, checks, params.mode, dl, ce)
    return ConeCheckReport(True, checks, params.mode, dl)
