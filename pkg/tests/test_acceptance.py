"""Exit criteria at full scale.  Each test prints one PASS/FAIL line."""

import time

import numpy as np
import pytest

import conftest
from evade import harness as hs
from evade import influence as inf
from evade import percolation as pc
from evade.model import CONTINUUM, ModelParams, verify_cone_disjointness
from evade.stats import wilson_interval

pytestmark = pytest.mark.acceptance


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    conftest.ACCEPTANCE.append(line)
    return ok


def test_criterion_01_cone_disjointness():
    t0 = time.perf_counter()
    reports = [verify_cone_disjointness(ModelParams(0.1, S, d), 20, 40, 16)
               for d in (2, 3) for S in (0.5, 1.0, 2.0)]
    elapsed = time.perf_counter() - t0
    # negative control: a much wider cone must produce a counterexample
    p = ModelParams(0.1, 1.0)
    control = verify_cone_disjointness(p, 20, 40, 16, delta=4 * p.delta)
    ok = all(r.passed for r in reports) and elapsed < 60 and not control.passed
    assert report(1, ok, f"6 settings pass={all(r.passed for r in reports)}, {elapsed:.1f}s, "
                         f"wide-cone control fails={not control.passed}")


def test_criterion_02_follower_soundness():
    cfg = hs.ExperimentConfig(ModelParams(0.1, 1.0), "percolation_follower", depth=30,
                              trials=1000, master_seed=2)
    res = hs.run_survival(cfg)
    emitted = cfg.trials - res.rows[0].failures
    ok = res.soundness_violations == 0 and emitted > 0
    assert report(2, ok, f"{emitted} trajectories emitted, {res.soundness_violations} violations")


def test_criterion_03_blocked_below_vacancy():
    m = pc.estimate_vacancy_marginal(ModelParams(0.2, 1.0), 20, 1000, seed=3)
    # at 0.2 almost every site is blocked in Y; a low intensity run keeps the check informative
    low = pc.estimate_vacancy_marginal(ModelParams(0.002, 1.0), 20, 300, seed=3)
    bad = m.dominance_violations + low.dominance_violations
    assert report(3, bad == 0, f"1000 joint builds, {m.dominance_violations} sites with Y > E "
                               f"(Y open {np.nanmean(m.site_freq_y):.3f}); supplementary 300 at "
                               f"0.002: {low.dominance_violations} (Y open "
                               f"{np.nanmean(low.site_freq_y):.3f})")


def test_criterion_04_thinning_monotonicity():
    grid = (0.02, 0.1, 0.5, 2.0)
    pp = pc.estimate_path_probability(ModelParams(0.1, 1.0), 10, 1000, seed=4, lambdas=grid)
    cfg = hs.ExperimentConfig(ModelParams(0.1, 1.0), "stationary", depth=10, trials=1000,
                              master_seed=4, lambda_grid=grid, coupled=True)
    res = hs.run_survival(cfg)
    bad = pp.field_violations + pp.monotonicity_violations + res.monotonicity_violations
    assert report(4, bad == 0, f"field {pp.field_violations}, path {pp.monotonicity_violations}, "
                               f"detection {res.monotonicity_violations} violations")


def _non_decreasing_with_ties(values, intervals):
    for (v0, c0), (v1, c1) in zip(zip(values, intervals), zip(values[1:], intervals[1:])):
        if v1 < v0 and c1[1] < c0[0]:
            return False
    return True


def test_criterion_05_phase_signature():
    t0 = time.perf_counter()
    cfg = hs.ExperimentConfig(ModelParams(0.01, 1.0), "percolation_follower", depth=50,
                              trials=1000, master_seed=5, lambda_grid=(0.01, 1.0), coupled=True)
    res = hs.run_survival(cfg)
    low, high = res.rows
    disjoint = low.ci_low > high.ci_high
    lams = (0.4, 0.1, 0.02, 0.005, 0.001)  # decreasing; Y only opens up below ~0.01
    marg = [pc.estimate_vacancy_marginal(ModelParams(lam, 1.0), 20, 300, seed=5, base_lam=0.4)
            for lam in lams]
    e_ok = _non_decreasing_with_ties([m.p_hat_e for m in marg], [m.ci_e for m in marg])
    y_ok = _non_decreasing_with_ties([m.p_hat_y for m in marg], [m.ci_y for m in marg])
    elapsed = time.perf_counter() - t0
    ok = disjoint and e_ok and y_ok and elapsed <= 600
    pe = ", ".join(f"{m.p_hat_e:.3f}" for m in marg)
    py = ", ".join(f"{m.p_hat_y:.3f}" for m in marg)
    assert report(5, ok, f"survival {low.estimate:.3f} at 0.01 vs {high.estimate:.3f} at 1.0; "
                         f"p_E [{pe}], p_Y [{py}] over lambda {lams}; {elapsed:.0f}s")


def test_criterion_06_chi_tail():
    s = inf.sample_chi(ModelParams(0.0, 1.0), 100_000, 200.0, seed=6)
    fit = inf.fit_exponential_tail(s.uncensored_chi(), 5.0, 20.0)
    ok = fit.slope < 0 and fit.residual <= 0.5 and s.censored_fraction < 0.01
    assert report(6, ok, f"slope {fit.slope:.3f}, residual {fit.residual:.3f}, "
                         f"censored {s.censored_fraction:.4f}")


def test_criterion_07_psi_intensity():
    reps = [inf.lemma_psi_intensity(ModelParams(0.2, 1.0), k, 10_000, seed=7 + k) for k in (1, 5)]
    ok = all(r.bound_ok for r in reps)
    detail = ", ".join(f"k={r.k} max mean {r.max_mean:.4f}" for r in reps)
    assert report(7, ok, f"{detail} (bound 0.2 + 3 SE)")


def test_criterion_08_entry_counts():
    reps = [inf.lemma_n_count(ModelParams(0.1, 1.0), k, 10_000, seed=8 + k) for k in (5, 10, 20)]
    dominated = all(r.passed for r in reps)
    c = np.array([r.c_fit for r in reps])
    stable = bool(np.all(np.abs(c / c.mean() - 1) <= 0.2))
    detail = ", ".join(f"k={r.k} c={r.c_fit:.3f} c_max={r.c_hat:.3f}" for r in reps)
    assert report(8, dominated and stable, f"dominated={dominated}, stable={stable}; {detail}")


def _enumerate_paths(field, depth):
    """Every oriented path from the origin, by exhaustive recursion."""
    def walk(site):
        k = abs(site[0]) + abs(site[1])
        if k == depth:
            return 1
        total = 0
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (site[0] + dx, site[1] + dy)
            if abs(n[0]) + abs(n[1]) == k + 1 and field[n] == 1:
                total += walk(n)
        return total
    return walk((0, 0)) if field[(0, 0)] == 1 else 0


def test_criterion_09_path_oracle():
    rng = np.random.default_rng(9)
    mismatches = 0
    for _ in range(200):
        depth = int(rng.integers(1, 9))
        grid = (rng.random((2 * depth + 1,) * 2) < rng.uniform(0.4, 0.9)).astype(np.int8)
        f = pc.VacancyField.from_values(depth, grid)
        mismatches += (pc.find_oriented_vacant_path(f) is not None) != (_enumerate_paths(f, depth) > 0)
    assert report(9, mismatches == 0, f"200 random fields, {mismatches} mismatches")


def test_criterion_10_statistics_plumbing():
    lo, hi = wilson_interval(5, 10, 1.96)
    wilson_ok = abs(lo - 0.2366) <= 1e-3 and abs(hi - 0.7634) <= 1e-3
    base = dict(params=ModelParams(0.1, 1.0), strategy="percolation_follower", depth=15,
                trials=200, master_seed=10, lambda_grid=(0.05, 0.2), coupled=True)
    one = hs.run_survival(hs.ExperimentConfig(**base, threads=1)).to_csv().encode()
    two = hs.run_survival(hs.ExperimentConfig(**base, threads=2)).to_csv().encode()
    ok = wilson_ok and one == two
    assert report(10, ok, f"wilson(5/10) = ({lo:.4f}, {hi:.4f}), CSV identical across "
                          f"1 and 2 workers: {one == two}")


def test_criterion_11_continuum_smoke():
    p = ModelParams(0.05, 1.0, mode=CONTINUUM)
    cfg = hs.ExperimentConfig(p, "percolation_follower", depth=10, trials=1000, master_seed=11,
                              step_dt=0.01)
    res = hs.run_survival(cfg)
    marg = pc.estimate_vacancy_marginal(p, 10, 1000, seed=11, step_dt=0.01)
    low = pc.estimate_vacancy_marginal(p.replace(lam=0.001), 10, 300, seed=11, step_dt=0.01)
    chi = inf.sample_chi(p, 10_000, 400.0, seed=11, step_dt=0.01)
    fit = inf.fit_exponential_tail(chi.uncensored_chi(), 5.0, 20.0)
    flagged = res.rows[0].discretized and marg.discretized and chi.discretized
    chi_ok = fit.slope < 0 and fit.residual <= 0.5 and chi.censored_fraction < 0.01
    y_bad = marg.dominance_violations + low.dominance_violations
    ok = res.soundness_violations == 0 and y_bad == 0 and chi_ok and flagged
    assert report(11, ok, f"follower violations {res.soundness_violations}, Y > E sites "
                          f"{y_bad} (Y open {np.nanmean(marg.site_freq_y):.3f} at 0.05, "
                          f"{np.nanmean(low.site_freq_y):.3f} at 0.001), chi slope {fit.slope:.3f} "
                          f"residual {fit.residual:.3f} censored {chi.censored_fraction:.4f}, "
                          f"discretized flag {flagged}")
