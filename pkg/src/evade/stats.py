"""Seeding and small statistical helpers shared by the Monte Carlo drivers.

Seed derivation: a trial's 64-bit seed is the first ``uint64`` word produced
by ``numpy.random.SeedSequence([master_seed, *keys])``.  Streams inside a
realization are then ``SeedSequence([trial_seed, stream_id])``.  SeedSequence
hashing is specified by numpy and platform independent, so the derivation is
bit-exact everywhere.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as _st


def derive_seed(master_seed: int, *keys: int) -> int:
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream_id)]))


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("wilson interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    n = float(trials)
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    lo = max(0.0, centre - half)
    hi = min(1.0, centre + half)
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return lo, hi


def poisson_tail(mean: float, m) -> np.ndarray:
    """P(Poisson(mean) >= m)."""
    return _st.poisson.sf(np.asarray(m) - 1, mean)


def log_poisson_tail_bound(mean: float, m: np.ndarray) -> np.ndarray:
    """Chernoff bound log P(Poisson(mean) >= m) <= -mean + m log(e mean / m).

    Returns 0 (the trivial bound) for ``m <= mean``.
    """
    m = np.asarray(m, dtype=float)
    out = np.zeros_like(m)
    if mean <= 0:
        out[m > 0] = -np.inf
        return out
    big = m > mean
    mm = m[big]
    out[big] = -mean + mm * (1.0 + math.log(mean) - np.log(mm))
    return out
