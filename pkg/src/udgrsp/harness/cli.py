"""Command-line drivers: rsp, sssp, decide, select and bench."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ..core_geom import InfeasibleError, Metric, PointSet, pairwise_distances
from ..rsp_l2 import RspInstance, SolverStats, rsp_baseline, solve
from ..sssp import make_oracle, oracle_cap, reference_oracle, reference_sssp, sssp
from .gen import DISTRIBUTIONS, far_target, gen_points
from .io import BadInputError, PointSetFile, RunReport

EXIT_OK, EXIT_INFEASIBLE, EXIT_MISMATCH, EXIT_BAD_INPUT = 0, 2, 3, 4

RSP_ALGOS = ("baseline", "algo1", "algo2", "weighted", "l1")
ALGOS = RSP_ALGOS + ("select",)

CSV_FIELDS = ("kind", "algorithm", "metric", "weighted", "n", "lam", "r_star", "feasible",
              "decision_call_count", "steps", "stages", "wall_time_ms", "seed", "oracle_checked", "slope")


class _Parser(argparse.ArgumentParser):
    # usage errors are bad input, keeping exit code 2 for infeasible runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")


# ---------------------------------------------------------------------------
# shared plumbing


def load_points(args) -> PointSet:
    if args.input is not None:
        return PointSetFile(Path(args.input)).read()
    if args.gen is None:
        raise BadInputError("give --input PATH or --gen N")
    if args.gen < 1:
        raise BadInputError("--gen needs n >= 1")
    return gen_points(args.gen, args.dist, args.seed, args.integer)


def _index(value: int | None, n: int, flag: str, default: int) -> int:
    i = default if value is None else value
    if not 0 <= i < n:
        raise BadInputError(f"{flag} {i} out of range for {n} points")
    return i


def make_instance(args, P: PointSet) -> RspInstance:
    if not (args.lam is not None and math.isfinite(args.lam) and args.lam > 0):
        raise BadInputError("--lambda must be a positive number")
    s = _index(args.source, P.n, "--source", 0)
    t = 0 if args.single_source else _index(args.target, P.n, "--target", P.n - 1)
    return RspInstance(P, s, t, float(args.lam), weighted=args.weighted, single_source=args.single_source)


def _check_combo(algo: str, metric: Metric, weighted: bool) -> None:
    if algo == "l1" and metric is not Metric.L1:
        raise BadInputError("--algo l1 needs --metric l1")
    if algo in ("algo1", "algo2", "weighted") and metric is not Metric.L2:
        raise BadInputError(f"--algo {algo} runs under --metric l2")
    if algo in ("algo1", "algo2") and weighted:
        raise BadInputError(f"--algo {algo} is for unweighted graphs")
    if algo == "weighted" and not weighted:
        raise BadInputError("--algo weighted needs --weighted")


def _solver_kwargs(algo: str, args) -> dict:
    kw: dict = {}
    if algo in ("algo2", "weighted") and args.threshold is not None:
        kw["threshold"] = args.threshold
    if algo == "l1":
        kw["degree"] = args.expander_degree
        kw["seed"] = args.seed
    return kw


def run_rsp(inst: RspInstance, algo: str, metric: Metric, args, check: bool, seed: int | None) -> RunReport:
    """One timed solver run; raises _Mismatch when --check disagrees."""
    stats = SolverStats()
    t0 = time.perf_counter()
    feasible = True
    try:
        r = solve(inst, algo, metric, stats=stats, **_solver_kwargs(algo, args))
    except InfeasibleError:
        feasible, r = False, None
    ms = (time.perf_counter() - t0) * 1e3
    report = RunReport(algo, metric.value, inst.weighted, inst.P.n, inst.lam, r, feasible,
                       stats.oracle_calls, stats.steps, stats.stages, ms, seed,
                       single_source=inst.single_source)
    if stats.fallback:
        report.extra["fallback"] = True
    if check:
        try:
            want = rsp_baseline(inst, metric)
        except InfeasibleError:
            want = None
        if want != r:
            raise _Mismatch(report, {"expected": want, "got": r})
        report.oracle_checked = True
    return report


class _Mismatch(Exception):
    def __init__(self, report: RunReport, detail: dict):
        super().__init__("oracle mismatch")
        self.report = report
        self.detail = detail


# ---------------------------------------------------------------------------
# subcommands


def cmd_rsp(args) -> int:
    if args.algo == "select":
        raise BadInputError("use the select subcommand for --algo select")
    # the weighted and L1 solvers name their graph type and metric
    if args.algo == "weighted":
        args.weighted = True
    metric = Metric.parse(args.metric or ("l1" if args.algo == "l1" else "l2"))
    _check_combo(args.algo, metric, args.weighted)
    P = load_points(args)
    inst = make_instance(args, P)
    report = run_rsp(inst, args.algo, metric, args, args.check, args.seed if args.input is None else None)
    if not report.feasible:
        _emit({"error": "infeasible"})
        return EXIT_INFEASIBLE
    _write_reports([report], args.out)
    return EXIT_OK


def _finite(vals) -> list:
    return [None if not math.isfinite(v) else (int(v) if float(v).is_integer() else float(v)) for v in vals]


def cmd_sssp(args) -> int:
    if not (args.radius is not None and args.radius > 0):
        raise BadInputError("--radius must be positive")
    P = load_points(args)
    s = _index(args.source, P.n, "--source", 0)
    metric = Metric.parse(args.metric)
    t0 = time.perf_counter()
    d = sssp(P, s, args.radius, metric, args.weighted)
    ms = (time.perf_counter() - t0) * 1e3
    out = {"source": s, "radius": args.radius, "metric": metric.value, "weighted": args.weighted,
           "n": P.n, "distances": _finite(d.values), "wall_time_ms": round(ms, 3), "oracle_checked": False}
    if args.check:
        ref = reference_sssp(P, s, args.radius, metric, args.weighted, cap=max(oracle_cap(), P.n)).values
        got = np.asarray(d.values)
        same = np.array_equal(np.isinf(ref), np.isinf(got))
        fin = np.isfinite(ref)
        if args.weighted:
            same = same and np.allclose(got[fin], ref[fin], rtol=1e-9, atol=0.0)
        else:
            same = same and np.array_equal(got[fin], ref[fin])
        if not same:
            _emit({"error": "mismatch"})
            return EXIT_MISMATCH
        out["oracle_checked"] = True
    _emit(out)
    return EXIT_OK


def cmd_decide(args) -> int:
    if args.radius is None or not math.isfinite(args.radius):
        raise BadInputError("--radius is required")
    P = load_points(args)
    inst = make_instance(args, P)
    metric = Metric.parse(args.metric)
    d = make_oracle(P, inst.s, inst.t, inst.lam, metric, inst.weighted, inst.single_source)
    ok = d(args.radius)
    out = {"radius": args.radius, "metric": metric.value, "feasible": bool(ok), "oracle_checked": False}
    if args.check:
        ref = reference_oracle(P, inst.s, inst.t, inst.lam, metric, inst.weighted, inst.single_source)
        if ref(args.radius) != ok:
            _emit({"error": "mismatch"})
            return EXIT_MISMATCH
        out["oracle_checked"] = True
    _emit(out)
    return EXIT_OK


def cmd_select(args) -> int:
    from ..rsp_l1 import l1_distance_select

    if Metric.parse(args.metric) is not Metric.L1:
        raise BadInputError("select runs under --metric l1")
    P = load_points(args)
    total = P.n * (P.n - 1) // 2
    if args.k is None or not 1 <= args.k <= total:
        raise BadInputError(f"--k must lie in [1, {total}]")
    stats = SolverStats()
    t0 = time.perf_counter()
    v = l1_distance_select(P, args.k, degree=args.expander_degree, seed=args.seed, stats=stats)
    ms = (time.perf_counter() - t0) * 1e3
    out = {"k": args.k, "value": _finite([v])[0], "n": P.n, "stages": stats.stages,
           "wall_time_ms": round(ms, 3), "oracle_checked": False}
    if args.check:
        if P.n > oracle_cap():
            raise BadInputError(f"--check needs n <= {oracle_cap()} (UDG_ORACLE_CAP)")
        if float(pairwise_distances(P, Metric.L1)[args.k - 1]) != v:
            _emit({"error": "mismatch"})
            return EXIT_MISMATCH
        out["oracle_checked"] = True
    _emit(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def parse_sizes(text: str) -> list[int]:
    """'4096,8192' or an exponent range '12:17' for 2^12..2^17."""
    try:
        if ":" in text:
            a, b = (int(x) for x in text.split(":"))
            return [2**e for e in range(a, b + 1)]
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise BadInputError(f"bad size list {text!r}") from exc


def instance_seed(seed: int, n: int, rep: int) -> int:
    return int(np.random.SeedSequence([seed, n, rep]).generate_state(1)[0])


def fit_slope(ns, times) -> float:
    """Least-squares slope of log(time) against log(n)."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.maximum(np.asarray(times, dtype=np.float64), 1e-9))
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def bench_instances(sizes, reps: int, args):
    """(n, rep, seed, RspInstance) in a fixed order."""
    for n in sizes:
        for rep in range(reps):
            seed = instance_seed(args.seed, n, rep)
            P = gen_points(n, args.dist, seed, args.integer)
            s = 0
            t = 0 if args.single_source else far_target(P, s)
            yield n, rep, seed, RspInstance(P, s, t, float(args.lam), weighted=args.weighted,
                                            single_source=args.single_source)


def run_bench(args) -> list[dict]:
    metric = Metric.parse(args.metric)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algos:
        if a not in RSP_ALGOS:
            raise BadInputError(f"unknown algorithm {a!r}")
        _check_combo(a, metric, args.weighted)
    if args.reps < 0:
        raise BadInputError("--reps must be >= 0")
    if not args.lam > 0:
        raise BadInputError("--lambda must be positive")
    sizes = parse_sizes(args.sizes)
    jobs = [(algo, n, seed, inst) for n, rep, seed, inst in bench_instances(sizes, args.reps, args) for algo in algos]

    def one(job):
        algo, n, seed, inst = job
        return run_rsp(inst, algo, metric, args, args.check, seed)

    # compile and load every kernel before the clock starts
    for algo in algos:
        warm = next(iter(bench_instances([32], 1, args)))[3]
        run_rsp(warm, algo, metric, args, False, None)
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            reports = list(pool.map(one, jobs))
    else:
        reports = [one(j) for j in jobs]
    rows = [dict(kind="run", **r.to_dict()) for r in reports]
    for algo in algos:
        per_n: dict[int, list[float]] = {}
        for r in reports:
            if r.algorithm == algo:
                per_n.setdefault(r.n, []).append(r.wall_time_ms)
        if len(per_n) >= 2:
            ns = sorted(per_n)
            rows.append({"kind": "slope", "algorithm": algo, "metric": metric.value,
                         "slope": fit_slope(ns, [float(np.median(per_n[n])) for n in ns])})
    return rows


def cmd_bench(args) -> int:
    rows = run_bench(args)
    if args.out == "csv":
        w = csv.DictWriter(sys.stdout, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
        if rows:
            w.writeheader()
            w.writerows(rows)
    else:
        for row in rows:
            _emit(row)
    return EXIT_OK


def _write_reports(reports: list[RunReport], out: str) -> None:
    if out == "csv":
        w = csv.DictWriter(sys.stdout, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(dict(kind="run", **r.to_dict()))
    else:
        for r in reports:
            sys.stdout.write(r.to_json() + "\n")


# ---------------------------------------------------------------------------
# argument parsing


def _common(metric_default: str | None = None, integer_default: bool = False) -> argparse.ArgumentParser:
    # a fresh parent per subcommand: argparse shares parent actions, so
    # per-command defaults would otherwise leak between subcommands
    common = _Parser(add_help=False)
    src = common.add_argument_group("input")
    src.add_argument("--input", metavar="PATH", help="CSV or JSON point file")
    src.add_argument("--gen", type=int, metavar="N", help="generate N points instead")
    src.add_argument("--dist", choices=DISTRIBUTIONS, default="uniform-square")
    src.add_argument("--seed", type=int, default=0)
    if integer_default:
        src.add_argument("--real-coords", dest="integer", action="store_false",
                         help="keep generated coordinates real")
    else:
        src.add_argument("--integer", action="store_true", help="round generated coordinates down to integers")
    common.add_argument("--metric", choices=("l1", "l2"), default=metric_default)
    common.add_argument("--weighted", action="store_true")
    common.add_argument("--lambda", dest="lam", type=float, default=None)
    common.add_argument("--source", type=int)
    common.add_argument("--target", type=int)
    common.add_argument("--single-source", action="store_true")
    common.add_argument("--check", action="store_true", help="compare against the brute-force oracle")
    common.add_argument("--threshold", type=float)
    common.add_argument("--expander-degree", type=int, default=64)
    common.add_argument("--out", choices=("json", "csv"), default="json")
    return common


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="udg-rsp", description="Shortest paths and reverse shortest paths on unit-disk graphs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("rsp", parents=[_common()], help="smallest radius meeting the path bound")
    r.add_argument("--algo", choices=ALGOS, default="baseline")
    r.set_defaults(func=cmd_rsp)
    s = sub.add_parser("sssp", parents=[_common("l2")], help="distances from the source at a fixed radius")
    s.add_argument("--radius", type=float)
    s.set_defaults(func=cmd_sssp)
    d = sub.add_parser("decide", parents=[_common("l2")], help="does the bound hold at a fixed radius")
    d.add_argument("--radius", type=float)
    d.set_defaults(func=cmd_decide)
    k = sub.add_parser("select", parents=[_common("l1")], help="k-th smallest L1 pairwise distance")
    k.add_argument("--k", type=int)
    k.add_argument("--algo", choices=("select",), default="select")
    k.set_defaults(func=cmd_select)
    b = sub.add_parser("bench", parents=[_common("l1", integer_default=True)],
                       help="timing ladder with log-log slope fits")
    b.add_argument("--algos", default="baseline,l1", help="comma-separated algorithm list")
    b.add_argument("--sizes", default="12:17", help="'a:b' for 2^a..2^b, or a comma list")
    b.add_argument("--reps", type=int, default=1)
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_bench, lam=8.0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BadInputError, ValueError, IndexError) as exc:
        _emit({"error": "bad input", "detail": str(exc)})
        return EXIT_BAD_INPUT
    except _Mismatch as exc:
        out = {"error": "mismatch", **{k: v for k, v in exc.detail.items()}}
        _emit(out)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
