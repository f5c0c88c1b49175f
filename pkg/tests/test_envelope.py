from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udgrsp.core_geom import DecisionOracle, RadiusInterval
from udgrsp.envelope import (ComparisonRoot, Separator, arc_membership_critical_values, batched_parametric_sort,
                             below_envelope, build_envelope, envelope_critical_values, key_at, key_roots,
                             solve_subproblem_parametric, voronoi_radii_brute)


def brute_within(reds, blues, r):
    reds = np.asarray(reds, dtype=float).reshape(-1, 2)
    return [bool(len(reds)) and bool((np.hypot(reds[:, 0] - bx, reds[:, 1] - by) <= r).any()) for bx, by in blues]


def test_single_arc():
    env = build_envelope([(0, -0.5)], 1, 0.0)
    (idx, (a, b)), = env.arcs
    assert idx == 0
    assert a == pytest.approx(-math.sqrt(0.75)) and b == pytest.approx(math.sqrt(0.75))


def test_two_arcs_meet_at_zero():
    env = build_envelope([(-1, -0.1), (1, -0.1)], 1, 0.0)
    assert [i for i, _ in env.arcs] == [0, 1]
    # the circles meet at (0, -0.1), below the line, so the split sits at x = 0
    left_end, right_start = env.arcs[0][1][1], env.arcs[1][1][0]
    assert left_end <= 0.0 <= right_start and left_end == pytest.approx(-right_start)
    wide = build_envelope([(-1, -0.1), (1, -0.1)], 1.2, 0.0)
    assert wide.arcs[0][1][1] == pytest.approx(0.0) and wide.arcs[1][1][0] == pytest.approx(0.0)


def test_far_red_gives_empty_envelope():
    env = build_envelope([(0, -2)], 1, 0.0)
    assert env.arcs == []
    assert below_envelope(env, [(0, 0.1), (5, 0)]) == [False, False]
    assert build_envelope([], 1, 0.0).arcs == []


def test_membership_examples():
    env = build_envelope([(0, -0.5)], 1, 0.0)
    assert below_envelope(env, [(0, 0.4), (0, 0.6)]) == [True, False]


def test_vertical_separator():
    reds = [(-0.5, 0.0), (-0.2, 3.0)]
    blues = [(0.4, 0.0), (0.5, 3.0), (0.9, 1.5)]
    env = build_envelope(reds, 1.0, Separator.vertical(0.0))
    assert below_envelope(env, blues) == brute_within(reds, blues, 1.0)


def test_critical_values_examples():
    assert 1 in envelope_critical_values([(-1, -1), (1, -1), (0, -2)]).round(12)
    assert envelope_critical_values([(0, 0), (1, 1), (2, 2)]).size == 0
    sq = envelope_critical_values([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert np.isclose(sq, math.sqrt(2) / 2).any()


def test_critical_values_delaunay_matches_brute():
    rng = np.random.default_rng(11)
    for _ in range(10):
        reds = rng.uniform(-5, 5, (40, 2))
        np.testing.assert_allclose(envelope_critical_values(reds), voronoi_radii_brute(reds), rtol=1e-9)


def test_parametric_sort_constant_keys():
    keys = [lambda r: 3.0, lambda r: 1.0, lambda r: 2.0]
    I = RadiusInterval(0, 10)
    perm, out = batched_parametric_sort(keys, lambda a, b: [], DecisionOracle(lambda r: True), I)
    assert perm == [1, 2, 0] and out == I


def test_parametric_sort_tie_is_stable():
    keys = [lambda r: 0.0, lambda r: 0.0]
    perm, _ = batched_parametric_sort(keys, lambda a, b: [], DecisionOracle(lambda r: True), RadiusInterval(0, 5))
    assert perm == [0, 1]


def test_parametric_sort_crossing():
    # key0 = r, key1 = 3 - r cross at 1.5; at r* = 2 key1 < key0
    keys = [lambda r: r, lambda r: 3.0 - r]
    roots = lambda a, b: [ComparisonRoot(1.5, "vertex-vertex")]
    d = DecisionOracle(lambda r: r >= 2.0)
    perm, I = batched_parametric_sort(keys, roots, d, RadiusInterval(0, 10))
    assert not I.interior(1.5) and 2.0 in I
    assert perm == [1, 0]


def test_key_roots_solve_equal_keys():
    rng = np.random.default_rng(2)
    for _ in range(50):
        c1, c2 = rng.uniform(-3, 3, 2)
        k1, k2 = rng.choice([-1.0, 1.0], 2)
        a1, a2 = rng.uniform(0, 2, 2)
        for r in key_roots([c1], [k1], [a1], [c2], [k2], [a2])[0]:
            if np.isfinite(r):
                assert key_at(c1, k1, a1, r) == pytest.approx(key_at(c2, k2, a2, r), abs=1e-6)


def test_arc_membership_values():
    assert arc_membership_critical_values([((0, 0.9), (-1, -0.1))]) == pytest.approx([math.sqrt(2)])
    assert arc_membership_critical_values([((2, 3), (2, -1))]) == pytest.approx([4])
    assert arc_membership_critical_values([]).size == 0


def test_subproblem_single_pair():
    delta = 2.0
    d = DecisionOracle(lambda r: r >= 3.0)
    flags, I = solve_subproblem_parametric([(0, -1)], [(0, 1)], None, d, RadiusInterval(0, math.inf))
    assert flags == [True]
    assert I.lo >= delta and 3.0 in I


def test_subproblem_no_reds():
    I0 = RadiusInterval(0, 7)
    flags, I = solve_subproblem_parametric(np.empty((0, 2)), [(0, 1), (2, 2)], None, DecisionOracle(lambda r: True), I0)
    assert flags == [False, False] and I == I0


def test_subproblem_random_bichromatic():
    rng = np.random.default_rng(32)
    for _ in range(5):
        reds = np.column_stack([rng.uniform(-4, 4, 32), -rng.uniform(0.01, 2, 32)])
        blues = np.column_stack([rng.uniform(-4, 4, 32), rng.uniform(0.01, 2, 32)])
        rstar = float(rng.uniform(0.5, 3))
        d = DecisionOracle(lambda r: r >= rstar)
        flags, I = solve_subproblem_parametric(reds, blues, None, d, RadiusInterval(0, 100))
        assert rstar in I
        assert flags == brute_within(reds, blues, rstar)


side = st.floats(-20, 20, allow_nan=False)
reds_st = st.lists(st.tuples(side, st.floats(-10, -0.01)), max_size=40)
blues_st = st.lists(st.tuples(side, st.floats(0, 10)), min_size=1, max_size=40)


@settings(max_examples=120, deadline=None)
@given(reds_st, blues_st, st.floats(0.05, 15))
def test_membership_matches_brute(reds, blues, r):
    env = build_envelope(reds, r, 0.0)
    # skip blues within rounding distance of a circle
    reds_a = np.asarray(reds, dtype=float).reshape(-1, 2)
    safe = [b for b in blues if not len(reds_a) or np.abs(np.hypot(reds_a[:, 0] - b[0], reds_a[:, 1] - b[1]) - r).min() > 1e-9]
    assert below_envelope(env, safe) == brute_within(reds, safe, r) if safe else True


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(side, st.floats(-10, -0.01)), min_size=3, max_size=12), st.floats(0.3, 12))
def test_structure_constant_between_critical_values(reds, r):
    crit = np.concatenate([envelope_critical_values(reds), np.abs(np.asarray(reds)[:, 1])])
    lo = crit[crit < r].max(initial=0.0)
    hi = crit[crit > r].min(initial=r + 1.0)
    if hi - lo < 1e-6:
        return
    a, b = lo + 0.3 * (hi - lo), lo + 0.7 * (hi - lo)
    # the defining reds can only change at a critical value or a line event
    from udgrsp.envelope import line_event_radii
    X, Y = np.asarray(reds, dtype=float).T
    o = np.lexsort((Y, X))
    ev = line_event_radii(np.ascontiguousarray(X[o]), np.ascontiguousarray(Y[o]), 0.0)
    if ((ev > a) & (ev < b)).any():
        return
    ea, eb = build_envelope(reds, a, 0.0), build_envelope(reds, b, 0.0)
    assert ea.red_index.tolist() == eb.red_index.tolist()
