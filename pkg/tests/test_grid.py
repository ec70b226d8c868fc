import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from agentsim import UniformGrid
from oracles import all_pairs


def grid_pairs(grid, radius):
    i, j = grid.neighbor_pairs(radius)
    return set(zip(i.tolist(), j.tolist()))


def test_box_coordinates_by_integer_division():
    g = UniformGrid([[0, 0, 0], [25, 0, 0]], extents=[10, 10])
    assert g.box_length == 10
    assert g.box_coordinates(0) == (0, 0, 0)
    assert g.box_coordinates(1) == (2, 0, 0)


def test_min_box_size_wins_over_small_agents():
    g = UniformGrid([[0, 0, 0]], extents=[2.0], min_box_size=12.0)
    assert g.box_length == 12.0


def test_empty_population():
    g = UniformGrid(np.zeros((0, 3)))
    assert g.n == 0
    assert len(g.neighbor_pairs(1.0)[0]) == 0
    assert g.occupancy().sum() == 0


def test_occupancy_partitions_agents():
    rng = np.random.default_rng(0)
    g = UniformGrid(rng.uniform(0, 100, (1000, 3)), extents=np.full(1000, 7.0))
    assert g.occupancy().sum() == 1000


def test_near_pair_sees_each_other():
    g = UniformGrid([[0, 0, 0], [5, 0, 0]], min_box_size=10)
    assert g.neighbors(0, 10).tolist() == [1]
    assert g.neighbors(1, 10).tolist() == [0]


def test_pair_beyond_radius():
    g = UniformGrid([[0, 0, 0], [11, 0, 0]], min_box_size=12)
    assert g.neighbors(0, 10).tolist() == []


def test_radius_larger_than_box_is_rejected():
    g = UniformGrid([[0, 0, 0], [5, 0, 0]], min_box_size=10)
    with pytest.raises(ValueError, match="box"):
        g.neighbors(0, 15)


def test_for_each_neighbor_visits_once_with_distance():
    g = UniformGrid([[0, 0, 0], [3, 4, 0], [0, 0, 9]], min_box_size=10)
    seen = []
    g.for_each_neighbor(0, 6.0, lambda j, d: seen.append((j, d)))
    assert seen == [(1, pytest.approx(5.0))]


def test_500_random_agents_match_oracle():
    rng = np.random.default_rng(1)
    pos = rng.uniform(0, 200, (500, 3))
    g = UniformGrid(pos, extents=np.full(500, 5.0), min_box_size=15.0)
    assert grid_pairs(g, g.box_length) == all_pairs(pos, g.box_length)


def test_unsorted_pairs_are_the_same_set():
    rng = np.random.default_rng(2)
    pos = rng.uniform(0, 50, (300, 3))
    g = UniformGrid(pos, min_box_size=8.0)
    i, j = g.neighbor_pairs(8.0, sort=False)
    assert set(zip(i.tolist(), j.tolist())) == grid_pairs(g, 8.0)
    assert len(i) == len(set(zip(i.tolist(), j.tolist())))


points = arrays(np.float64, st.tuples(st.integers(0, 60), st.just(3)),
                elements=st.floats(-50, 50, allow_nan=False, allow_infinity=False))


@settings(max_examples=60, deadline=None)
@given(points, st.floats(0.5, 20.0), st.floats(0.1, 1.0))
def test_oracle_equivalence_property(pos, edge, frac):
    g = UniformGrid(pos, min_box_size=edge)
    r = edge * frac
    assert grid_pairs(g, r) == all_pairs(pos, r)


@settings(max_examples=40, deadline=None)
@given(points, st.floats(1.0, 20.0))
def test_neighbor_relation_is_symmetric(pos, edge):
    g = UniformGrid(pos, min_box_size=edge)
    pairs = grid_pairs(g, edge)
    assert all((b, a) in pairs for a, b in pairs)


def _moving_grid(prev_pos, new_pos, ids=None, eps=1e-9, edge=10.0):
    ids = np.arange(len(prev_pos)) if ids is None else ids
    old = UniformGrid(prev_pos, min_box_size=edge)
    g = UniformGrid(new_pos, min_box_size=edge)
    g.mark_stationary(np.arange(len(new_pos)), old.state(ids), eps)
    return g


def test_frozen_population_is_all_stationary():
    rng = np.random.default_rng(3)
    pos = rng.uniform(0, 100, (200, 3))
    g = _moving_grid(pos, pos)
    assert g.stationary_rows().all()


def test_single_displacement_flags_27_boxes():
    pos = np.array([[55.0, 55.0, 55.0], [5.0, 5.0, 5.0]])
    new = pos.copy()
    new[0, 0] += 2e-9
    g = _moving_grid(pos, new)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                assert not g.is_region_stationary((5 + dx, 5 + dy, 5 + dz))
    assert g.is_region_stationary((0, 0, 0))
    assert g.is_region_stationary((5, 5, 7))


def test_birth_breaks_stationarity():
    pos = np.array([[5.0, 5.0, 5.0], [95.0, 95.0, 95.0]])
    new = np.vstack([pos, [[6.0, 5.0, 5.0]]])
    g = _moving_grid(pos, new)
    assert not g.is_region_stationary((0, 0, 0))
    assert g.is_region_stationary((9, 9, 9))


def test_two_clusters_frozen_interior():
    rng = np.random.default_rng(4)
    moving = rng.uniform(0, 30, (50, 3))
    frozen = rng.uniform(130, 160, (50, 3))
    pos = np.vstack([moving, frozen])
    new = pos.copy()
    new[:50] += rng.normal(scale=0.5, size=(50, 3))
    g = _moving_grid(pos, new)
    mask = g.stationary_rows()
    assert mask[50:].all()
    assert not mask[:50].any()


def test_no_previous_grid_means_nothing_stationary():
    g = UniformGrid(np.zeros((3, 3)), min_box_size=1.0)
    g.mark_stationary(np.arange(3), None, 1e-9)
    assert not g.stationary_rows().any()
