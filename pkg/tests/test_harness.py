from __future__ import annotations

import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udgrsp.core_geom import PointSet
from udgrsp.harness.cli import main
from udgrsp.harness.gen import DISTRIBUTIONS, far_target, gen_points
from udgrsp.harness.io import BadInputError, PointSetFile, RunReport, loads, validate_report


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:  # argparse errors leave through sys.exit
        code = exc.code
    out = capsys.readouterr().out
    return code, [json.loads(line) for line in out.splitlines() if line.strip()]


@pytest.fixture
def chain_csv(tmp_path):
    p = tmp_path / "chain.csv"
    p.write_text("x,y\n" + "".join(f"{i},0\n" for i in range(6)))
    return str(p)


def test_gen_examples():
    P = gen_points(5, "collinear", seed=123)
    assert P.points == ((0, 0), (1, 0), (2, 0), (3, 0), (4, 0))
    a, b = gen_points(50, "clustered", 7), gen_points(50, "clustered", 7)
    assert a.points == b.points
    U = gen_points(1000, "uniform-square", 3)
    assert U.xs.min() >= 0 and U.xs.max() < 1000 and U.ys.min() >= 0 and U.ys.max() < 1000
    assert gen_points(40, "grid-jitter", 1, integer_mode=True).integer_mode
    with pytest.raises(ValueError):
        gen_points(4, "spiral", 0)


def test_far_target():
    P = PointSet.from_points([(0, 0), (3, 0), (0, -3), (1, 1)])
    assert far_target(P) == 1


def test_rsp_check_example(capsys, chain_csv):
    code, rows = run(capsys, "rsp", "--algo", "algo1", "--metric", "l2", "--lambda", "3", "--source", "0",
                     "--target", "5", "--input", chain_csv, "--check")
    assert code == 0 and rows[0]["r_star"] == 2 and rows[0]["oracle_checked"] is True
    validate_report(rows[0])


def test_rsp_l1_weighted_two_points(capsys, tmp_path):
    p = tmp_path / "two.json"
    p.write_text("[[0, 0], [3, 4]]")
    code, rows = run(capsys, "rsp", "--algo", "l1", "--weighted", "--lambda", "7", "--target", "1", "--input", str(p))
    assert code == 0 and rows[0]["r_star"] == 7 and rows[0]["metric"] == "l1"


def test_rsp_infeasible_exit(capsys):
    code, rows = run(capsys, "rsp", "--algo", "weighted", "--lambda", "0.1", "--gen", "30", "--seed", "4")
    assert code == 2 and rows == [{"error": "infeasible"}]


def test_bad_input_exit(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n0,0\nnan,1\n")
    assert run(capsys, "rsp", "--input", str(p), "--lambda", "2")[0] == 4
    assert run(capsys, "rsp", "--bogus")[0] == 4
    assert run(capsys, "rsp", "--gen", "10", "--target", "99", "--lambda", "2")[0] == 4


def test_thin_drivers(capsys, chain_csv):
    code, rows = run(capsys, "sssp", "--input", chain_csv, "--radius", "2")
    assert code == 0 and rows[0]["distances"] == [0, 1, 1, 2, 2, 3]
    code, rows = run(capsys, "decide", "--input", chain_csv, "--radius", "1", "--lambda", "4", "--target", "5")
    assert code == 0 and rows[0]["feasible"] is False
    code, rows = run(capsys, "select", "--input", chain_csv, "--k", "6")
    assert code == 0 and rows[0]["value"] == 2


def test_bench_empty_and_deterministic(capsys):
    assert run(capsys, "bench", "--sizes", "16", "--reps", "0") == (0, [])
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_ms"} for r in rows if r.get("kind") == "run"]
    a = run(capsys, "bench", "--sizes", "16,32", "--reps", "2", "--seed", "5")[1]
    b = run(capsys, "bench", "--sizes", "16,32", "--reps", "2", "--seed", "5")[1]
    assert strip(a) == strip(b) and len(strip(a)) == 8
    assert all(r["r_star"] == s["r_star"] for r, s in zip(strip(a)[::2], strip(a)[1::2]))


def test_module_entry_point(chain_csv):
    out = subprocess.run([sys.executable, "-m", "udgrsp", "sssp", "--input", chain_csv, "--radius", "1"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["distances"] == [0, 1, 2, 3, 4, 5]


def test_report_schema():
    rep = RunReport("algo1", "l2", False, 6, 3.0, r_star=2.0, decision_call_count=4, steps=3)
    obj = json.loads(rep.to_json())
    validate_report(obj)
    assert obj["r_star"] == 2 and obj["lam"] == 3
    bad = RunReport("algo1", "l2", False, 6, 3.0, feasible=False).to_dict()
    assert "r_star" not in bad
    validate_report(bad)
    with pytest.raises(ValueError):
        validate_report({**obj, "steps": "3"})
    with pytest.raises(ValueError):
        validate_report({k: v for k, v in obj.items() if k != "n"})


def test_loads_formats():
    assert loads("0,0\n1.5,2\n").points == ((0.0, 0.0), (1.5, 2.0))
    assert loads("[[1, 2], [3, 4]]", "json").points == ((1, 2), (3, 4))
    for text, kind in (("", "csv"), ("1,2,3\n", "csv"), ("[[1]]", "json"), ("[[1, Infinity]]", "json"), ("x,y\n0,inf\n", "csv")):
        with pytest.raises(BadInputError):
            loads(text, kind)


coords = st.floats(-1e6, 1e6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=30), st.sampled_from(["a.csv", "a.json"]))
def test_point_file_round_trip(tmp_path_factory, pts, name):
    P = PointSet.from_points(pts)
    f = PointSetFile(tmp_path_factory.mktemp("rt") / name)
    f.write(P)
    Q = f.read()
    assert np.array_equal(P.xs, Q.xs) and np.array_equal(P.ys, Q.ys)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300), st.sampled_from(DISTRIBUTIONS), st.integers(0, 2**32), st.booleans())
def test_generator_contract(n, dist, seed, integer):
    P = gen_points(n, dist, seed, integer)
    assert P.n == n and np.all(np.isfinite(P.xs))
    if dist != "collinear":
        assert P.xs.min() >= 0 and P.xs.max() < n and P.ys.min() >= 0 and P.ys.max() < n
    assert gen_points(n, dist, seed, integer).points == P.points
    if integer:
        assert P.integer_mode
