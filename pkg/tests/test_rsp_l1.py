from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udgrsp.core_geom import PointSet, RadiusInterval, pairwise_distances
from udgrsp.rsp_l1 import (RangeTree2D, Rect, annulus_rects, canonical_report, collect_pairs, count_in_rect,
                           count_pairs_leq, expander_edges, l1_distance_select, rotate45, rsp_l1)
from udgrsp.rsp_l2 import RspInstance, SolverStats, rsp_baseline

AXIS = PointSet.from_points([(0, 0), (1, 0), (3, 0)])


def tree(P):
    rot = rotate45(P)
    return rot, RangeTree2D.build(rot)


def test_rotate_examples():
    rot = rotate45(PointSet.from_points([(0, 0), (3, 4)]))
    assert (rot.u[0], rot.v[0]) == (0, 0)
    assert (rot.u[1], rot.v[1]) == (7, -1)


def test_annulus_example():
    rects = annulus_rects((0, 0), RadiusInterval(1, 3))
    assert rects == [Rect(-3, -1, -3, 3, u1_open=True), Rect(1, 3, -3, 3, u0_open=True),
                     Rect(-1, 1, 1, 3, v0_open=True), Rect(-1, 1, -3, -1, v1_open=True)]
    rng = np.random.default_rng(0)
    for u, v in rng.uniform(-4, 4, (2000, 2)):
        inside = 1 < max(abs(u), abs(v)) <= 3
        assert sum(R.contains(u, v) for R in rects) == int(inside)


def test_annulus_from_zero_excludes_center():
    rects = annulus_rects((0, 0), RadiusInterval(0, 2))
    assert not any(R.contains(0, 0) for R in rects)
    assert any(R.contains(0, 0.5) for R in rects)


def test_annulus_clamps_infinite():
    rot, _ = tree(AXIS)
    rects = annulus_rects((rot.u[0], rot.v[0]), RadiusInterval(0, math.inf), rot)
    assert all(math.isfinite(x) for R in rects for x in (R.u0, R.u1, R.v0, R.v1))
    with pytest.raises(ValueError):
        annulus_rects((0, 0), RadiusInterval(0, math.inf))


def test_rect_queries():
    rng = np.random.default_rng(64)
    P = PointSet.from_points(rng.integers(0, 30, (64, 2)))
    rot, T = tree(P)
    assert count_in_rect(T, Rect(-100, 100, -100, 100)) == 64
    assert sorted(np.concatenate([T.canonical_points(g) for g in canonical_report(T, Rect(-100, 100, -100, 100))]).tolist()) == list(range(64))
    assert count_in_rect(T, Rect(5, 4, 0, 1)) == 0 and canonical_report(T, Rect(5, 4, 0, 1)) == []
    for _ in range(30):
        u0, u1 = sorted(rng.uniform(-10, 70, 2))
        v0, v1 = sorted(rng.uniform(-40, 40, 2))
        R = Rect(u0, u1, v0, v1, u0_open=True)
        want = sorted(i for i in range(64) if R.contains(rot.u[i], rot.v[i]))
        assert count_in_rect(T, R, True) == len(want)
        got = np.concatenate([T.canonical_points(g) for g in canonical_report(T, R, True)] + [np.empty(0, np.int64)])
        assert sorted(got.tolist()) == want


def test_collect_pairs_examples():
    rot, T = tree(AXIS)
    pairs = collect_pairs(rot, T, RadiusInterval(0, math.inf), normalize=False)
    assert sum(c.size for c in pairs) == 2 * 3
    assert collect_pairs(rot, T, RadiusInterval(1.2, 1.9)) == []


def test_count_pairs_examples():
    rot, T = tree(AXIS)
    assert count_pairs_leq(rot, T, 1) == 1
    assert count_pairs_leq(rot, T, 3) == 3


def test_select_examples():
    assert l1_distance_select(AXIS, 1) == 1
    assert l1_distance_select(AXIS, 2) == 2
    assert l1_distance_select(AXIS, 3) == 3
    with pytest.raises(ValueError):
        l1_distance_select(AXIS, 4)


def test_select_random_all_k():
    rng = np.random.default_rng(128)
    P = PointSet.from_points(rng.uniform(0, 50, (128, 2)))
    want = pairwise_distances(P, "l1")
    for k in range(1, want.size + 1, 37):
        assert l1_distance_select(P, k) == want[k - 1]


def test_expander_examples():
    e = expander_edges(range(4), range(4), 3, seed=1)
    da, db = e.degrees(4, 4)
    assert len(e) <= 12 and da.min() >= 1 and da.max() <= 3 and db.min() >= 1 and db.max() <= 3
    e = expander_edges(range(7), range(4), 3, seed=1)
    da, db = e.degrees(7, 4)
    assert da.max() <= 3 and db.max() <= math.ceil(3 * 7 / 4)
    again = expander_edges(range(7), range(4), 3, seed=1)
    assert e.a.tolist() == again.a.tolist() and e.b.tolist() == again.b.tolist()
    assert len(expander_edges([], range(3), 3)) == 0


def test_rsp_l1_examples():
    chain = PointSet.from_points([(i, 0) for i in range(6)])
    assert rsp_l1(RspInstance(chain, 0, 5, 5)) == 1
    diag = PointSet.from_points([(0, 0), (1, 1), (2, 2)])
    assert rsp_l1(RspInstance(diag, 0, 2, 2)) == 2
    two = PointSet.from_points([(0, 0), (3, 4)])
    assert rsp_l1(RspInstance(two, 0, 1, 7, weighted=True)) == 7


def test_rsp_l1_stats():
    rng = np.random.default_rng(1)
    P = PointSet.from_points(rng.integers(0, 200, (300, 2)))
    st_ = SolverStats()
    inst = RspInstance(P, 0, 299, 4)
    assert rsp_l1(inst, stats=st_) == rsp_baseline(inst, "l1")
    assert st_.stages >= 1 and not st_.fallback


int_pts = st.lists(st.tuples(st.integers(-30, 30), st.integers(-30, 30)), min_size=2, max_size=40)
real_pts = st.lists(st.tuples(st.floats(-30, 30), st.floats(-30, 30)), min_size=2, max_size=40)


@settings(max_examples=60, deadline=None)
@given(st.one_of(int_pts, real_pts), st.data())
def test_multiset_identity(points, data):
    P = PointSet.from_points(points)
    pw = pairwise_distances(P, "l1")
    lo, hi = sorted(data.draw(st.lists(st.sampled_from([0.0] + pw.tolist()), min_size=2, max_size=2)))
    if lo == hi:
        hi = math.inf
    rot, T = tree(P)
    pairs = collect_pairs(rot, T, RadiusInterval(lo, hi), normalize=False)
    assert sum(c.size for c in pairs) == 2 * int(((pw > lo) & (pw <= hi)).sum())
    for c in collect_pairs(rot, T, RadiusInterval(lo, hi)):
        assert c.K.size >= c.L.size
        assert sum(b - a for a, b in c.blocks) == c.K.size


@settings(max_examples=60, deadline=None)
@given(st.one_of(int_pts, real_pts))
def test_count_pairs_prefix(points):
    P = PointSet.from_points(points)
    pw = pairwise_distances(P, "l1")
    rot, T = tree(P)
    for r in np.unique(pw)[:10]:
        assert count_pairs_leq(rot, T, float(r)) == int((pw <= r).sum())


@settings(max_examples=40, deadline=None)
@given(int_pts, st.integers(1, 6), st.booleans())
def test_rsp_l1_matches_baseline(points, lam, weighted):
    P = PointSet.from_points(points)
    t = len(points) - 1
    if weighted:
        lam = lam * (abs(points[0][0] - points[t][0]) + abs(points[0][1] - points[t][1]))
        if lam == 0:
            return
    inst = RspInstance(P, 0, t, lam, weighted=weighted)
    try:
        want = rsp_baseline(inst, "l1")
    except Exception as exc:
        with pytest.raises(type(exc)):
            rsp_l1(inst)
        return
    assert rsp_l1(inst) == want


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 8), st.integers(0, 2**31))
def test_expander_degree_bounds(na, nb, d, seed):
    e = expander_edges(range(na), range(nb), d, seed)
    da, db = e.degrees(na, nb)
    big, small = max(na, nb), min(na, nb)
    dbig, dsmall = (da, db) if na >= nb else (db, da)
    assert dbig.min() >= 1 and dbig.max() <= d
    assert dsmall.min() >= 1 and dsmall.max() <= d * math.ceil(big / small)
    assert len(set(zip(e.a.tolist(), e.b.tolist()))) == len(e)


big_int_pts = st.lists(st.tuples(st.integers(0, 2**20), st.integers(0, 2**20)), min_size=2, max_size=30)


@settings(max_examples=60, deadline=None)
@given(big_int_pts, st.data())
def test_count_pairs_between_integers(points, data):
    # radii just below an integer distance must not round up to it
    P = PointSet.from_points(points)
    pw = pairwise_distances(P, "l1")
    rot, T = tree(P)
    v = data.draw(st.sampled_from(pw.tolist()))
    for r in (float(np.nextafter(v, -math.inf)), v - 0.5, v + 0.5):
        assert count_pairs_leq(rot, T, r) == int((pw <= r).sum())
        if r <= 0:
            continue
        I = RadiusInterval(max(r - 3.0, 0.0), r)
        pairs = collect_pairs(rot, T, I, normalize=False)
        assert sum(c.size for c in pairs) == 2 * int(((pw > I.lo) & (pw <= I.hi)).sum())
