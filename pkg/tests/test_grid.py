from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udgrsp.core_geom import DecisionOracle, PointSet, RadiusInterval
from udgrsp.grid import (SQRT2, SortedMatrixSpec, build_grid, grid_matrix_candidates, min_cell_distance,
                         parametric_grid, sorted_matrix_shrink)
from udgrsp.rsp_l2 import RspInstance, rsp_baseline
from udgrsp.sssp import make_oracle, reference_sssp

pts_strategy = st.lists(st.tuples(st.floats(0, 20, allow_nan=False), st.floats(0, 20, allow_nan=False)),
                        min_size=1, max_size=40)


def test_single_point_grid():
    g = build_grid(PointSet.from_points([(0, 0)]), 0, math.sqrt(2))
    assert len(g.occupied) == 1 and g.live_points.tolist() == [0]


def test_gap_prunes_unreachable():
    g = build_grid(PointSet.from_points([(0, 0), (2, 0)]), 0, 1)
    assert 1 not in g.live_points.tolist()


def test_lines_and_columns():
    g = build_grid(PointSet.from_points([(0, 0), (0.6, 0.6), (1.2, 0)]), 0, 1)
    assert np.allclose(g.v_lines, [0, 1 / SQRT2, 2 / SQRT2])
    assert g.cell_of[0][1] == g.cell_of[1][1] == 1
    assert g.cell_of[2][1] == 2


def test_boundary_point_goes_right_and_up():
    g = build_grid(PointSet.from_points([(0, 0), (1, 1)]), 0, SQRT2)
    assert g.side == 1.0
    assert g.cell_of[1] == (g.cell_of[0][0] + 1, g.cell_of[0][1] + 1)


def test_min_cell_distance_examples():
    g = build_grid(PointSet.from_points([(0, 0)]), 0, SQRT2)  # side 1
    w = g.side
    assert min_cell_distance((1, 1), (1, 2), g) == 0
    assert min_cell_distance((1, 1), (1, 3), g) == w
    for off in [(2, 1), (1, 2), (3, 3), (2, 0)]:
        C, C2 = (5, 5), (5 + off[0], 5 + off[1])
        # closed squares: min distance is attained on the boundary; sample edges densely
        a = np.array([(x, y) for x in np.linspace(4, 5, 11) for y in np.linspace(4, 5, 11)]) * w
        b = a + np.array([off[1], off[0]]) * w
        brute = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)).min()
        assert min_cell_distance(C, C2, g) == pytest.approx(brute)
    assert min_cell_distance((1, 1), (3, 2), g) == w


def test_sorted_matrix_example():
    spec = SortedMatrixSpec.from_offsets([0, 1])
    assert [spec.entry(2, j) for j in range(1, 5)] == pytest.approx([1.414, 0.707, 0.471, 0.354], abs=1e-3)
    d = DecisionOracle(lambda r: r >= 1)
    I = sorted_matrix_shrink(spec, d, RadiusInterval(0, math.inf))
    assert (I.lo, I.hi) == pytest.approx((SQRT2 / 2, SQRT2))
    I = sorted_matrix_shrink(spec, DecisionOracle(lambda r: r >= 5), RadiusInterval(0, 10))
    assert (I.lo, I.hi) == (SQRT2, 10)
    single = SortedMatrixSpec.from_offsets([0])
    I0 = RadiusInterval(0, 3)
    assert sorted_matrix_shrink(single, d, I0) == I0


def test_parametric_grid_two_points():
    P = PointSet.from_points([(0, 0), (1, 0)])
    d = make_oracle(P, 0, 1, 1, "l2")
    g, I = parametric_grid(P, 0, d, RadiusInterval(0, math.inf))
    assert (I.lo, I.hi) == pytest.approx((SQRT2 / 2, SQRT2))
    assert g.cell_of[0][1] != g.cell_of[1][1]
    single = PointSet.from_points([(3, 3)])
    g, I = parametric_grid(single, 0, d, RadiusInterval(0, 5))
    assert (I.lo, I.hi) == (0, 5) and len(g.occupied) == 1


def test_parametric_grid_matches_grid_at_rstar():
    rng = np.random.default_rng(64)
    for seed in range(5):
        P = PointSet.from_points(rng.uniform(0, 64, (64, 2)))
        inst = RspInstance(P, 0, 63, 3)
        rstar = rsp_baseline(inst, "l2")
        d = inst.oracle("l2")
        g, I = parametric_grid(P, 0, d, RadiusInterval(0, 200))
        assert rstar in I
        at = build_grid(P, 0, rstar, prune=False)
        assert g.shape_signature() == at.shape_signature()


@pytest.mark.parametrize("method", ["fj", "staircase"])
def test_shrink_methods_agree_with_enumeration(method):
    rng = np.random.default_rng(3)
    for _ in range(10):
        spec = SortedMatrixSpec.from_offsets(rng.uniform(0, 10, 12))
        target = float(rng.uniform(0, 10))
        d = DecisionOracle(lambda r: r >= target)
        I = sorted_matrix_shrink(spec, d, RadiusInterval(0, 100), method=method)
        e = spec.entries()
        assert not ((e > I.lo) & (e < I.hi)).any()
        assert target in I or I.hi == 100 or I.hi >= target > I.lo


@settings(max_examples=40, deadline=None)
@given(pts_strategy, st.floats(0.3, 8))
def test_same_cell_adjacent_and_edges_in_neighbors(pts, r):
    P = PointSet.from_points(pts)
    g = build_grid(P, 0, r)
    for cell, members in g.occupied.items():
        for p, q in itertools.combinations(members.tolist(), 2):
            assert math.dist(pts[p], pts[q]) <= r
    for p in g.live_points.tolist():
        for q in range(len(pts)):
            if q != p and math.dist(pts[p], pts[q]) <= r:
                assert q in g.cell_of
                c, c2 = g.cell_of[p], g.cell_of[q]
                assert c2 == c or c2 in g.neighbors[c]
    assert all(len(v) <= 24 for v in g.neighbors.values())


@settings(max_examples=30, deadline=None)
@given(pts_strategy, st.floats(0.3, 8))
def test_pruned_points_unreachable(pts, r):
    P = PointSet.from_points(pts)
    g = build_grid(P, 0, r)
    ref = reference_sssp(P, 0, r).values
    for p in range(len(pts)):
        if p not in g.cell_of:
            assert math.isinf(ref[p])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=2, max_size=30), st.integers(1, 4))
def test_parametric_grid_stable_inside_interval(pts, lam):
    P = PointSet.from_points(pts)
    d = make_oracle(P, 0, len(pts) - 1, lam, "l2")
    g, I = parametric_grid(P, 0, d, RadiusInterval(0, 100))
    cands = grid_matrix_candidates(P, 0)
    assert not ((cands > I.lo) & (cands < I.hi)).any()
    hi = min(I.hi, 100)
    sig = g.shape_signature()
    for t in np.linspace(0.1, 0.9, 5):
        assert build_grid(P, 0, I.lo + t * (hi - I.lo), prune=False).shape_signature() == sig
