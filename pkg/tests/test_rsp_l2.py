from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udgrsp.core_geom import DecisionOracle, InfeasibleError, IntervalLog, PointSet, RadiusInterval, observe_intervals
from udgrsp.rsp_l2 import (RspInstance, SolverStats, partition_V_parametric, rsp_baseline, rsp_unweighted_algo1,
                           rsp_unweighted_algo2, rsp_weighted, small_pair_preprocess, solve)
from udgrsp.sssp import partition_V

CHAIN = PointSet.from_points([(i, 0) for i in range(6)])


def test_baseline_examples():
    assert rsp_baseline(RspInstance(CHAIN, 0, 5, 5)) == 1
    assert rsp_baseline(RspInstance(CHAIN, 0, 5, 3)) == 2
    with pytest.raises(InfeasibleError):
        rsp_baseline(RspInstance(CHAIN, 0, 5, 4.9, weighted=True))


def test_algo1_examples():
    two = PointSet.from_points([(0, 0), (3, 0)])
    assert rsp_unweighted_algo1(RspInstance(two, 0, 1, 1)) == 3
    assert rsp_unweighted_algo1(RspInstance(CHAIN, 0, 5, 3)) == 2


def test_algo2_degenerate_thresholds():
    rng = np.random.default_rng(9)
    for i in range(6):
        P = PointSet.from_points(rng.uniform(0, 20, (60, 2)))
        inst = RspInstance(P, 0, 59, 1 + i % 4)
        want = rsp_baseline(inst)
        assert rsp_unweighted_algo2(inst, threshold=math.inf) == want
        assert rsp_unweighted_algo2(inst, threshold=0) == want == rsp_unweighted_algo1(inst)


def test_weighted_examples():
    P = PointSet.from_points([(0, 0), (3, 0), (4, 0)])
    assert rsp_weighted(RspInstance(P, 0, 2, 4, weighted=True)) == 3
    two = PointSet.from_points([(0, 0), (3, 4)])
    assert rsp_weighted(RspInstance(two, 0, 1, 7, weighted=True)) == 5


def test_small_pair_examples():
    A, B = np.array([[0.0, 0.0]]), np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    I = small_pair_preprocess([(A, B)], DecisionOracle(lambda r: r >= 2.5), RadiusInterval(0, math.inf))
    assert 2 <= I.lo and I.hi <= 3
    I0 = RadiusInterval(0, 4)
    assert small_pair_preprocess([], DecisionOracle(lambda r: True), I0) == I0


def test_partition_parametric_examples():
    # one site: assignment equals containment at r*
    out, I = partition_V_parametric([(0, -1)], [(0, 0.5), (3, 0.5)], DecisionOracle(lambda r: r >= 2), RadiusInterval(0, 10))
    assert out == [[0]] and 2 in I
    # site 1 reaches the point at 2, site 0 takes over from 5 on
    U, V = [(-3, -3), (0, -1)], [(0, 1)]
    # flags hold on the open interval, so an r* at a critical distance sees the side below it
    for rstar, want in ((1.5, [[], []]), (2.0, [[], []]), (2.01, [[], [0]]), (5.0, [[], [0]]), (6.0, [[0], []])):
        out, I = partition_V_parametric(U, V, DecisionOracle(lambda r, t=rstar: r >= t), RadiusInterval(0, 10))
        assert rstar in I and out == want == partition_V(U, V, I.midpoint())


def test_partition_parametric_random():
    rng = np.random.default_rng(32)
    for _ in range(4):
        U = np.column_stack([rng.uniform(-5, 5, 32), -rng.uniform(0.01, 3, 32)])
        V = np.column_stack([rng.uniform(-5, 5, 32), rng.uniform(0.01, 3, 32)])
        rstar = float(rng.uniform(1, 4))
        log = IntervalLog()
        with observe_intervals(log):
            out, I = partition_V_parametric(U, V, DecisionOracle(lambda r: r >= rstar), RadiusInterval(0, 50))
        assert rstar in I and not log.violations(rstar)
        assert out == partition_V(U, V, rstar) == partition_V(U, V, I.midpoint())


def test_solve_dispatch_and_stats():
    st_ = SolverStats()
    assert solve(RspInstance(CHAIN, 0, 5, 3), "algo1", stats=st_) == 2
    assert 0 < st_.steps <= 3 and st_.oracle_calls > 0
    assert solve(RspInstance(CHAIN, 0, 5, 3), "l1") == 2
    with pytest.raises(ValueError):
        solve(RspInstance(CHAIN, 0, 5, 3), "nope")


def test_trivial_cases():
    assert rsp_baseline(RspInstance(CHAIN, 2, 2, 1)) == 0
    dup = PointSet.from_points([(0, 0), (0, 0), (1, 0)])
    assert rsp_unweighted_algo1(RspInstance(dup, 0, 1, 1)) == 0


def test_single_source_mode():
    inst = RspInstance(CHAIN, 0, 0, 3, single_source=True)
    assert rsp_baseline(inst) == 2 == rsp_unweighted_algo1(inst) == rsp_unweighted_algo2(inst)


pts = st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=2, max_size=48, unique=True)


@settings(max_examples=40, deadline=None)
@given(pts, st.integers(1, 6))
def test_unweighted_solvers_agree(points, lam):
    inst = RspInstance(PointSet.from_points(points), 0, len(points) - 1, lam)
    try:
        want = rsp_baseline(inst)
    except InfeasibleError:
        return
    log = IntervalLog()
    with observe_intervals(log):
        a1 = rsp_unweighted_algo1(inst)
        a2 = rsp_unweighted_algo2(inst)
    assert a1 == want == a2
    assert not log.violations(want)
    d = inst.oracle()
    assert d(want)


@settings(max_examples=40, deadline=None)
@given(pts, st.floats(1.0, 3.0))
def test_weighted_solver_agrees(points, factor):
    P = PointSet.from_points(points)
    lam = factor * math.dist(points[0], points[-1])
    inst = RspInstance(P, 0, len(points) - 1, lam, weighted=True)
    want = rsp_baseline(inst)
    for th in (None, 2):
        got = rsp_weighted(inst, threshold=th)
        assert abs(got - want) <= 1e-9 * max(1.0, want)


@settings(max_examples=40, deadline=None)
@given(pts, st.integers(1, 6))
def test_predecessor_infeasible(points, lam):
    inst = RspInstance(PointSet.from_points(points), 0, len(points) - 1, lam)
    try:
        r = rsp_baseline(inst)
    except InfeasibleError:
        return
    d = inst.oracle()
    P = inst.P
    dists = np.unique(np.hypot(P.xs[:, None] - P.xs[None, :], P.ys[:, None] - P.ys[None, :]))
    below = dists[dists < r]
    assert d(r)
    if below.size:
        assert not d(float(below[-1]))
