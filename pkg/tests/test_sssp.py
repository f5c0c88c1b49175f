from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udgrsp.core_geom import OracleCapError, PointSet
from udgrsp.sssp import (AwnnIndex, bfs_unweighted, decide, partition_V, reference_sssp, sssp, wx_weighted)

CHAIN6 = PointSet.from_points([(i, 0) for i in range(6)])
CHAIN4 = PointSet.from_points([(i, 0) for i in range(4)])


def test_bfs_chain():
    assert bfs_unweighted(CHAIN6, 0, 1).tolist() == [0, 1, 2, 3, 4, 5]
    assert bfs_unweighted(CHAIN6, 0, 2).tolist() == [0, 1, 1, 2, 2, 3]


def test_wx_chain():
    assert wx_weighted(CHAIN4, 0, 1).tolist() == [0, 1, 2, 3]
    assert wx_weighted(CHAIN4, 0, 2.5).tolist() == [0, 1, 2, 3]


def test_reference_mirrors_examples():
    assert reference_sssp(CHAIN6, 0, 1).tolist() == [0, 1, 2, 3, 4, 5]
    assert reference_sssp(CHAIN6, 0, 2).tolist() == [0, 1, 1, 2, 2, 3]
    assert reference_sssp(CHAIN4, 0, 2.5, weighted=True).tolist() == [0, 1, 2, 3]
    with pytest.raises(OracleCapError):
        reference_sssp(CHAIN6, 0, 1, cap=3)


def test_unreachable_is_inf():
    P = PointSet.from_points([(0, 0), (5, 0)])
    assert math.isinf(bfs_unweighted(P, 0, 1)[1])
    assert math.isinf(wx_weighted(P, 0, 1)[1])


@pytest.mark.parametrize("metric", ["l2", "l1"])
def test_random_200_matches_reference(metric):
    rng = np.random.default_rng(200)
    P = PointSet.from_points(rng.uniform(0, 20, (200, 2)))
    for r in (0.8, 1.5, 3.0):
        np.testing.assert_array_equal(sssp(P, 0, r, metric).values, reference_sssp(P, 0, r, metric).values)
        np.testing.assert_allclose(sssp(P, 0, r, metric, True).values,
                                   reference_sssp(P, 0, r, metric, True).values, rtol=1e-9)


def test_decide_examples():
    assert decide(CHAIN6, 0, 5, 5, 1)
    assert not decide(CHAIN6, 0, 5, 4, 1)
    assert not decide(CHAIN6, 0, 5, 4.9, 1, weighted=True)
    assert decide(CHAIN6, 0, 5, 5, 1, single_source=True)


def test_partition_examples():
    assert partition_V([(0, -1)], [(0, 0)], 2) == [[0]]
    assert partition_V([(-5, -1), (0, -1)], [(0, 0)], 2) == [[], [0]]


def test_awnn_matches_scan():
    rng = np.random.default_rng(5)
    idx = AwnnIndex()
    sites = []
    for k in range(100):
        x, y, w = rng.uniform(0, 10, 3)
        idx.insert(x, y, w)
        sites.append((x, y, w))
        qx, qy = rng.uniform(0, 10, 2)
        vals = [w0 + math.hypot(x0 - qx, y0 - qy) for x0, y0, w0 in sites]
        label, best = idx.nearest(qx, qy)
        assert best == pytest.approx(min(vals)) and vals[label] == pytest.approx(best)
    assert AwnnIndex().nearest(0, 0) == (-1, math.inf)


pts = st.lists(st.tuples(st.integers(0, 25), st.integers(0, 25)), min_size=1, max_size=40)


@settings(max_examples=60, deadline=None)
@given(pts, st.floats(0.5, 10), st.sampled_from(["l1", "l2"]), st.booleans())
def test_fast_matches_reference(points, r, metric, weighted):
    P = PointSet.from_points(points)
    fast, ref = sssp(P, 0, r, metric, weighted).values, reference_sssp(P, 0, r, metric, weighted).values
    np.testing.assert_allclose(fast, ref, rtol=1e-9)


@settings(max_examples=60, deadline=None)
@given(pts, st.floats(0.5, 8), st.floats(0, 5), st.booleans())
def test_monotone_in_radius(points, r, extra, weighted):
    P = PointSet.from_points(points)
    small, big = sssp(P, 0, r, "l2", weighted).values, sssp(P, 0, r + extra, "l2", weighted).values
    assert np.all(big <= small * (1 + 1e-12))


@settings(max_examples=60, deadline=None)
@given(pts, st.floats(0.5, 10))
def test_weighted_lower_bound(points, r):
    P = PointSet.from_points(points)
    d = wx_weighted(P, 0, r).values
    direct = np.hypot(P.xs - P.xs[0], P.ys - P.ys[0])
    fin = np.isfinite(d)
    assert np.all(d[fin] >= direct[fin] * (1 - 1e-12))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-3, -0.01)), min_size=1, max_size=10),
       st.lists(st.tuples(st.floats(-5, 5), st.floats(0, 3)), min_size=1, max_size=10), st.floats(0.2, 5))
def test_partition_is_first_site_within_r(U, V, r):
    Ua, Va = np.asarray(U), np.asarray(V)
    D = np.hypot(Ua[:, None, 0] - Va[None, :, 0], Ua[:, None, 1] - Va[None, :, 1])
    if np.abs(D - r).min() < 1e-9:
        return
    got = partition_V(U, V, r)
    want = [[] for _ in U]
    for j in range(len(V)):
        hit = np.flatnonzero(D[:, j] <= r)
        if hit.size:
            want[hit[0]].append(j)
    assert got == want
