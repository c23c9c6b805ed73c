import json

import numpy as np
import pytest

from evade import harness as hs
from evade.model import ModelParams
from evade.stats import wilson_interval


def _cfg(**kw):
    base = dict(params=ModelParams(0.1, 1.0), strategy="stationary", depth=6, trials=40,
                master_seed=11)
    base.update(kw)
    return hs.ExperimentConfig(**base)


def test_zero_intensity_always_survives():
    for strat in ("stationary", "drift", "greedy", "percolation_follower"):
        res = hs.run_survival(_cfg(params=ModelParams(0.0, 1.0), strategy=strat, trials=5))
        assert res.rows[0].estimate == 1.0 and res.rows[0].failures == 0


def test_coupled_lambda_grid_is_monotone():
    for strat in ("stationary", "drift", "percolation_follower"):
        res = hs.run_survival(_cfg(strategy=strat, lambda_grid=(0.02, 0.1, 0.5), coupled=True))
        assert res.monotonicity_violations == 0
        est = [r.estimate for r in res.rows]
        assert est == sorted(est, reverse=True)
        assert res.soundness_violations == 0


def test_coupled_speed_grid_stationary_monotone():
    res = hs.run_survival(_cfg(speed_grid=(0.5, 1.0, 2.0), coupled=True))
    assert res.monotonicity_violations == 0
    est = [r.estimate for r in res.rows]
    assert est == sorted(est)
    assert [r.grid_value for r in res.rows] == [0.5, 1.0, 2.0]


def test_runs_are_deterministic():
    c = _cfg(strategy="percolation_follower", lambda_grid=(0.05, 0.2))
    assert hs.run_survival(c).to_csv() == hs.run_survival(c).to_csv()
    other = hs.run_survival(_cfg(strategy="percolation_follower", lambda_grid=(0.05, 0.2),
                                 master_seed=12))
    assert other.outcomes.shape == (40, 2)


def test_output_independent_of_worker_count():
    c1 = _cfg(strategy="percolation_follower", lambda_grid=(0.05, 0.3), coupled=True, threads=1)
    c2 = _cfg(strategy="percolation_follower", lambda_grid=(0.05, 0.3), coupled=True, threads=2)
    r1, r2 = hs.run_survival(c1), hs.run_survival(c2)
    assert r1.to_csv().encode() == r2.to_csv().encode()
    assert r1.to_json(False) != r2.to_json(False)  # thread count is part of the echoed config
    assert np.array_equal(r1.outcomes, r2.outcomes)


def test_interval_shrinks_with_trials():
    w = [hs.run_survival(_cfg(params=ModelParams(0.05, 1.0), depth=4, trials=n)).rows[0]
         for n in (100, 400)]
    ratio = (w[1].ci_high - w[1].ci_low) / (w[0].ci_high - w[0].ci_low)
    assert abs(ratio - 0.5) <= 0.2 * 0.5 + 0.05
    lo, hi = wilson_interval(50, 100)
    lo4, hi4 = wilson_interval(200, 400)
    assert abs((hi4 - lo4) / (hi - lo) - 0.5) < 0.1 * 0.5


def test_csv_and_json_layout():
    res = hs.run_survival(_cfg(lambda_grid=(0.1, 0.2)))
    lines = res.to_csv().splitlines()
    assert lines[0] == ",".join(hs.CSV_COLUMNS)
    assert len(lines) == 3 and lines[1].split(",")[0] == "0.1"
    doc = json.loads(res.to_json())
    assert doc["format_version"] == hs.FORMAT_VERSION and len(doc["rows"]) == 2
    assert "wall_time" in doc and "wall_time" not in json.loads(res.to_json(False))
    assert hs.ExperimentConfig.from_dict(doc["config"]) == res.config


def test_write_to_file(tmp_path):
    path = tmp_path / "out.json"
    res = hs.run_survival(_cfg(fmt="json", output=str(path)))
    text = res.write()
    assert path.read_text() == text


def test_config_validation():
    p = ModelParams(0.1, 1.0)
    bad = [dict(strategy="teleport"), dict(trials=0), dict(depth=-1),
           dict(lambda_grid=(0.1, 0.2), speed_grid=(1.0, 2.0)), dict(lambda_grid=(0.1, 0.3, 0.2)),
           dict(lambda_grid=(-0.1, 0.2)), dict(speed_grid=(0.0, 1.0)), dict(fmt="xml"),
           dict(threshold=1.0), dict(threads=0)]
    for kw in bad:
        with pytest.raises(ValueError):
            hs.ExperimentConfig(p, **kw)
    assert hs.ExperimentConfig(p, strategy="percolation").strategy == "percolation_follower"


def test_bisection_on_synthetic_step():
    lo, hi, n = hs.bisect_survival(lambda x: 1.0 if x < 0.37 else 0.0, 0.0, 1.0, 0.5, 1e-3)
    assert lo < 0.37 <= hi and hi - lo <= 1e-3
    assert n <= 2 + 11
    with pytest.raises(hs.NoCrossing):
        hs.bisect_survival(lambda x: 1.0, 0.0, 1.0, 0.5, 1e-3)
    with pytest.raises(hs.NoCrossing):
        hs.bisect_survival(lambda x: 0.0, 0.0, 1.0, 0.5, 1e-3)
    with pytest.raises(ValueError):
        hs.bisect_survival(lambda x: 0.0, 1.0, 0.0, 0.5, 1e-3)


def test_lambda_det_bracket():
    c = _cfg(strategy="percolation_follower", depth=8, trials=60, lambda_range=(1e-3, 2.0),
             tolerance=1e-3)
    br = hs.estimate_lambda_det(1.0, c)
    assert 0 < br.lo < br.hi <= 2.0 and br.width <= 1e-3
    assert "lower-bound proxy" in br.label
    u = hs.follower_thresholds(c.params, 8, 60, c.master_seed, 2.0)
    assert np.mean(br.lo / 2.0 <= u) >= 0.5 > np.mean(br.hi / 2.0 <= u)


def test_deeper_paths_are_nested():
    p = ModelParams(0.2, 1.0)
    shallow = hs.follower_thresholds(p, 6, 20, 3, 0.5, window_depth=12)
    deep = hs.follower_thresholds(p, 12, 20, 3, 0.5)
    assert np.all(deep <= shallow)
    with pytest.raises(ValueError):
        hs.follower_thresholds(p, 12, 2, 3, 0.5, window_depth=6)


def test_lemma_suite_at_zero_intensity():
    rep = hs.run_lemma_suite(_cfg(params=ModelParams(0.0, 1.0), trials=50), chi_samples=3000)
    assert rep.passed
    assert all(r.max_mean == 0 for r in rep.psi)


def test_lemma_suite_at_low_intensity():
    rep = hs.run_lemma_suite(_cfg(params=ModelParams(0.1, 1.0), trials=300), chi_samples=5000)
    assert rep.psi_ok and rep.n_count_ok and rep.chi_ok
    s = rep.summary()
    assert s["passed"] and s["chi"]["censored_fraction"] < 0.01


def test_lemma_suite_flags_heavy_censoring():
    # doubling the jump rate at the same horizon leaves too many walks inside the cone
    c = _cfg(params=ModelParams(0.1, 1.0, jump_rate=2.0), trials=50)
    rep = hs.run_lemma_suite(c, chi_samples=5000)
    assert rep.chi.censored_fraction >= 0.01 and not rep.chi_ok
    longer = hs.run_lemma_suite(c, chi_samples=3000, chi_horizon=600.0)
    assert longer.chi_ok
