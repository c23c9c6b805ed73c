import math

import pytest
from hypothesis import given, strategies as st

from evade.model import (CONTINUUM, Cone, ModelParams, cell_of, cone_contains, in_hyperplane,
                         l1, level_end, level_sites, level_start, oriented_successors,
                         verify_cone_disjointness)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-0.1, 1.0)
    with pytest.raises(ValueError):
        ModelParams(0.1, 0.0)
    with pytest.raises(ValueError):
        ModelParams(0.1, 1.0, dim=1)
    with pytest.raises(ValueError):
        ModelParams(0.1, 1.0, mode="torus")


@given(st.floats(0.01, 100), st.integers(2, 8))
def test_delta_positive(speed, dim):
    p = ModelParams(0.0, speed, dim)
    assert p.delta > 0
    assert p.delta == pytest.approx(speed / (4 * math.sqrt(dim)))


def test_cell_intervals():
    c = cell_of((2, 1, 0, 0), ModelParams(1.0, 1.0, dim=4))
    assert (c.t_start, c.t_end) == (3.0, 4.0)
    c = cell_of((0, 0), ModelParams(1.0, 2.0))
    assert (c.t_start, c.t_end) == (0.0, 0.5)
    c = cell_of((-3, 2), ModelParams(1.0, 0.5))
    assert (c.t_start, c.t_end) == (10.0, 12.0)


def test_cell_off_plane_rejected():
    with pytest.raises(ValueError):
        cell_of((0, 0, 1), ModelParams(1.0, 1.0, dim=3))


def test_continuum_cell_radius():
    assert cell_of((1, 0), ModelParams(1.0, 1.0, mode=CONTINUUM)).radius == pytest.approx(4 / 3)


@given(st.integers(-50, 50), st.integers(-50, 50), st.floats(0.05, 20))
def test_cell_length_and_shared_boundary(x, y, speed):
    p = ModelParams(0.0, speed)
    c = cell_of((x, y), p)
    assert c.t_end - c.t_start == pytest.approx(1 / speed, rel=1e-12)
    for nxt in oriented_successors((x, y)):
        assert cell_of(nxt, p).t_start == c.t_end


def test_level_sites_examples():
    assert level_sites(0) == [(0, 0)]
    assert set(level_sites(1)) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    j3 = level_sites(3, dim=5)
    brute = {(x, y) + (0, 0, 0) for x in range(-3, 4) for y in range(-3, 4) if abs(x) + abs(y) == 3}
    assert len(j3) == 12 and set(j3) == brute


@given(st.integers(1, 60))
def test_level_size(k):
    sites = level_sites(k)
    assert len(sites) == 4 * k
    assert all(l1(s) == k for s in sites)


def test_level_radius_cap():
    assert all(max(abs(s[0]), abs(s[1])) <= 2 for s in level_sites(4, radius_cap=2))


def test_successor_examples():
    assert set(oriented_successors((0, 0))) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert set(oriented_successors((2, 1))) == {(3, 1), (2, 2)}
    assert set(oriented_successors((2, 0))) == {(3, 0), (2, 1), (2, -1)}


@given(st.integers(-40, 40), st.integers(-40, 40), st.integers(2, 4))
def test_successor_properties(x, y, dim):
    site = (x, y) + (0,) * (dim - 2)
    succ = oriented_successors(site)
    assert 2 <= len(succ) <= 4
    for s in succ:
        assert l1(s) == l1(site) + 1 and in_hyperplane(s)
        assert sum(abs(a - b) for a, b in zip(s, site)) == 1


def test_cone_membership():
    cone = Cone((0, 0), 0.0, 0.25)
    assert cone_contains(cone, (1, 0), 5.0)
    assert not cone_contains(cone, (1, 0), 4.0)
    assert not cone_contains(cone, (0, 0), 0.0)


@given(st.integers(0, 30))
def test_levels_tile_time(k):
    starts = {level_start(k, 1.5)} | {cell_of(s, ModelParams(0.0, 1.5)).t_start for s in level_sites(k)}
    assert starts == {k / 1.5}
    assert level_end(k, 1.5) == level_start(k + 1, 1.5)


@pytest.mark.parametrize("dim,speed", [(2, 1.0), (3, 2.0), (2, 0.5)])
def test_cone_disjointness_small(dim, speed):
    rep = verify_cone_disjointness(ModelParams(0.1, speed, dim), 6, 12, t_samples=8)
    assert rep.passed and str(rep) == "pass" and rep.checks > 0


def test_cone_disjointness_continuum():
    rep = verify_cone_disjointness(ModelParams(0.1, 1.0, mode=CONTINUUM), 10, 25)
    assert rep.passed


def test_cone_disjointness_negative_control():
    p = ModelParams(0.1, 1.0)
    rep = verify_cone_disjointness(p, 4, 8, delta=4 * p.delta)
    assert not rep.passed
    ce = rep.counterexample
    assert ce["distance"] < ce["cone_radius"]
    assert str(rep).startswith("fail")


def test_cone_disjointness_range_check():
    with pytest.raises(ValueError):
        verify_cone_disjointness(ModelParams(0.1, 1.0), 5, 3)
