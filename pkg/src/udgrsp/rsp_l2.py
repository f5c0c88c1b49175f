"""Reverse shortest path solvers for the Euclidean metric.

All solvers return the smallest pairwise distance r for which the s-t
path-length bound holds in the unit-disk graph of radius r.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import _scan
from .core_geom import (
    DecisionOracle, InfeasibleError, Metric, PointSet, RadiusInterval,
    emit_interval, interval_shrink, max_pairwise_distance, pairwise_distances,
    smallest_feasible, verify_rstar,
)
from .envelope import SubInstance
from .grid import Grid, parametric_grid
from .sssp import make_oracle, oracle_cap, orientation, partition_V, reference_oracle

# pairs beyond this are never materialized by the baseline
_MATERIALIZE_LIMIT = 20_000_000
_BASELINE_BUDGET = 2_000_000
_BASELINE_BINS = 4096


@dataclass(frozen=True)
class RspInstance:
    P: PointSet
    s: int
    t: int
    lam: float
    weighted: bool = False
    single_source: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        n = self.P.n
        if n == 0:
            raise ValueError("empty point set")
        if not 0 <= self.s < n:
            raise IndexError(f"source {self.s} out of range")
        if not self.single_source and not 0 <= self.t < n:
            raise IndexError(f"target {self.t} out of range")

    @property
    def bound(self) -> float:
        """Path-length bound; hop bounds are floored."""
        return float(self.lam) if self.weighted else float(math.floor(self.lam))

    def oracle(self, m: Metric | str = Metric.L2, reference: bool = False) -> DecisionOracle:
        if reference:
            return reference_oracle(self.P, self.s, self.t, self.lam, m, self.weighted, self.single_source)
        return make_oracle(self.P, self.s, self.t, self.lam, m, self.weighted, self.single_source)


@dataclass(frozen=True)
class CellClass:
    """Cells with at least ``threshold`` points are large."""

    threshold: float
    large: frozenset

    @classmethod
    def of(cls, grid: Grid, threshold: float) -> "CellClass":
        return cls(threshold, frozenset(c for c, pts in grid.occupied.items() if len(pts) >= threshold))

    def is_large(self, cell) -> bool:
        return cell in self.large

    def pair_large(self, a, b) -> bool:
        return a in self.large or b in self.large


@dataclass
class SolverStats:
    algorithm: str = ""
    oracle_calls: int = 0
    steps: int = 0
    stages: int = 0
    fallback: bool = False
    stage_counts: list[int] = field(default_factory=list)


def unweighted_threshold(n: int) -> float:
    n = max(n, 2)
    return (n / math.log2(n)) ** 0.75


def weighted_threshold(n: int) -> float:
    n = max(n, 2)
    return n**0.75 * math.log2(n) ** 1.5


def _trivial(inst: RspInstance) -> bool:
    return inst.P.n == 1 or (not inst.single_source and inst.s == inst.t)


def precheck(inst: RspInstance, m: Metric | str, d: DecisionOracle, check_zero: bool = True) -> float | None:
    """Raise when infeasible; return 0.0 when the bound already holds at
    radius 0, otherwise None."""
    if _trivial(inst):
        return 0.0
    if not d(max_pairwise_distance(inst.P, m)):
        raise InfeasibleError("the bound fails even in the complete graph")
    if check_zero and d(0.0):
        return 0.0
    return None


def _finish(stats: SolverStats | None, d: DecisionOracle, name: str) -> None:
    if stats is not None:
        stats.algorithm = stats.algorithm or name
        stats.oracle_calls = d.call_count


# ---------------------------------------------------------------------------
# baseline


def rsp_baseline(inst: RspInstance, m: Metric | str = Metric.L2, *, stats: SolverStats | None = None,
                 oracle: DecisionOracle | None = None) -> float:
    """Binary search over the sorted pairwise distances."""
    m = Metric.parse(m)
    P = inst.P
    if oracle is not None:
        d = oracle
    elif P.n <= oracle_cap():
        d = inst.oracle(m, reference=True)
    else:
        d = inst.oracle(m)
    zero = precheck(inst, m, d, check_zero=False)
    if zero is not None:
        _finish(stats, d, "baseline")
        return zero
    n = P.n
    if n * (n - 1) // 2 <= _MATERIALIZE_LIMIT:
        vals = np.unique(pairwise_distances(P, m))
        k = smallest_feasible(vals, d)
        _finish(stats, d, "baseline")
        return float(vals[k])
    # too many pairs to hold: narrow by equal-width bins, then enumerate
    lo, hi = 0.0, max_pairwise_distance(P, m)
    while True:
        if np.nextafter(lo, math.inf) >= hi:
            break
        cnt = _scan.count_between(P.xs, P.ys, m.code, lo, hi)
        if cnt <= _BASELINE_BUDGET:
            vals, _ = _scan.collect_between(P.xs, P.ys, m.code, lo, hi, max(cnt, 1))
            vals = np.unique(vals)
            k = smallest_feasible(vals, d)
            hi = float(vals[k])
            if k == 0 and lo == 0.0 and d(0.0):
                hi = 0.0
            break
        edges = np.unique(np.linspace(lo, hi, _BASELINE_BINS + 1)[1:-1])
        edges = edges[(edges > lo) & (edges < hi)]
        k = smallest_feasible(edges, d)
        if k < edges.size:
            hi = float(edges[k])
        if k > 0:
            lo = float(edges[k - 1])
    _finish(stats, d, "baseline")
    return hi


# ---------------------------------------------------------------------------
# parametric BFS shared by both unweighted algorithms


def _check_unweighted(inst: RspInstance) -> None:
    if inst.weighted:
        raise ValueError("this solver handles the unweighted problem")


def _start(inst: RspInstance, d: DecisionOracle, method: str):
    zero = precheck(inst, Metric.L2, d)
    if zero is not None:
        return zero, None, None
    I = emit_interval(RadiusInterval(0.0, max_pairwise_distance(inst.P, Metric.L2)), "start")
    grid, I = parametric_grid(inst.P, inst.s, d, I, method=method)
    return None, grid, I


def _parametric_bfs(inst: RspInstance, grid: Grid, I: RadiusInterval, d: DecisionOracle,
                    classes: CellClass | None, stats: SolverStats | None) -> RadiusInterval:
    """Run BFS for the unknown optimal radius, shrinking I so every
    discovered set is the same for all radii inside it."""
    P = inst.P
    xs, ys = P.xs, P.ys
    n = P.n
    lam = int(inst.bound)
    level = np.full(n, -1, np.int64)
    level[inst.s] = 0
    undiscovered = {c: len(pts) for c, pts in grid.occupied.items()}
    undiscovered[grid.cell_of[inst.s]] -= 1
    remaining = n - 1
    frontier = np.array([inst.s])
    i = 0
    while frontier.size and i < lam:
        if not inst.single_source and level[inst.t] >= 0:
            break
        if inst.single_source and remaining == 0:
            break
        i += 1
        cells: dict[tuple[int, int], list[int]] = {}
        for p in frontier.tolist():
            cells.setdefault(grid.cell_of[p], []).append(p)
        new: list[int] = []
        for c in cells:
            pts = grid.occupied[c]
            fresh = pts[level[pts] < 0]
            if fresh.size:
                level[fresh] = i
                undiscovered[c] -= fresh.size
                new.extend(fresh.tolist())
        param: list[SubInstance] = []
        direct: list[SubInstance] = []
        for c, reds in cells.items():
            reds = np.array(reds, dtype=np.int64)
            for c2 in grid.neighbors[c]:
                if undiscovered[c2] == 0:
                    continue
                pts = grid.occupied[c2]
                blues = pts[level[pts] < 0]
                o = int(orientation(c2[0] - c[0], c2[1] - c[1]))
                sub = SubInstance.build(xs, ys, reds, blues, o, red_key=c)
                if classes is None or classes.pair_large(c, c2):
                    param.append(sub)
                else:
                    direct.append(sub)
        results: list[tuple[SubInstance, np.ndarray]] = []
        if param:
            flags, I = _solve_step(param, d, I)
            results.extend(zip(param, flags))
        if direct:
            mid = I.midpoint()
            results.extend((sub, sub.flags_at(mid)[0]) for sub in direct)
        for sub, flags in results:
            for q in sub.blue_ids[flags].tolist():
                if level[q] < 0:
                    level[q] = i
                    undiscovered[grid.cell_of[q]] -= 1
                    new.append(q)
        remaining -= len(new)
        frontier = np.array(new, dtype=np.int64)
    if stats is not None:
        stats.steps = i
    return I


def _solve_step(instances: list[SubInstance], d, I: RadiusInterval):
    from .envelope import solve_batch

    return solve_batch(instances, d, I, source="solve_subproblem_parametric")


def rsp_unweighted_algo1(inst: RspInstance, *, stats: SolverStats | None = None,
                         oracle: DecisionOracle | None = None, grid_method: str = "fj") -> float:
    """Parametric BFS: every step settles all of its envelope instances in one batch."""
    _check_unweighted(inst)
    d = oracle or inst.oracle(Metric.L2)
    zero, grid, I = _start(inst, d, grid_method)
    if zero is not None:
        _finish(stats, d, "algo1")
        return zero
    I = _parametric_bfs(inst, grid, I, d, None, stats)
    r = verify_rstar(I.hi, inst.P, Metric.L2, d)
    _finish(stats, d, "algo1")
    return r


# ---------------------------------------------------------------------------
# small cell pairs


def _cross(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    dx = A[:, 0][:, None] - B[:, 0][None, :]
    dy = A[:, 1][:, None] - B[:, 1][None, :]
    return np.sqrt(dx * dx + dy * dy)


def small_pair_preprocess(pairs, d, I: RadiusInterval, source: str = "small_pair_preprocess") -> RadiusInterval:
    """Shrink I until no distance between the two sides of any pair lies
    strictly inside it.

    ``pairs`` holds (A, B) coordinate arrays.  Each round probes the median
    of every set's surviving distances in one batched search, so every set
    loses at least half of its survivors per round.
    """
    sets = []
    for A, B in pairs:
        A = np.asarray(A, dtype=np.float64).reshape(-1, 2)
        B = np.asarray(B, dtype=np.float64).reshape(-1, 2)
        if len(A) and len(B):
            sets.append(np.unique(_cross(A, B)))
    while True:
        sets = [v[(v > I.lo) & (v < I.hi)] for v in sets]
        sets = [v for v in sets if v.size]
        if not sets:
            break
        meds = np.array([np.partition(v, v.size // 2)[v.size // 2] for v in sets])
        I = interval_shrink(I, meds, d)
        emit_interval(I, source)
    return I


def _small_pairs(grid: Grid, classes: CellClass, xs, ys):
    P_xy = np.column_stack([xs, ys])
    out = []
    for c, nbrs in grid.neighbors.items():
        if classes.is_large(c):
            continue
        for c2 in nbrs:
            if c2 > c and not classes.is_large(c2):
                out.append((P_xy[grid.occupied[c]], P_xy[grid.occupied[c2]]))
    return out


def rsp_unweighted_algo2(inst: RspInstance, threshold: float | None = None, *, stats: SolverStats | None = None,
                         oracle: DecisionOracle | None = None, grid_method: str = "fj") -> float:
    """Parametric BFS where only pairs touching a large cell stay parametric."""
    _check_unweighted(inst)
    d = oracle or inst.oracle(Metric.L2)
    zero, grid, I = _start(inst, d, grid_method)
    if zero is not None:
        _finish(stats, d, "algo2")
        return zero
    tau = unweighted_threshold(inst.P.n) if threshold is None else threshold
    classes = CellClass.of(grid, tau)
    I = small_pair_preprocess(_small_pairs(grid, classes, inst.P.xs, inst.P.ys), d, I)
    I = _parametric_bfs(inst, grid, I, d, classes, stats)
    r = verify_rstar(I.hi, inst.P, Metric.L2, d)
    _finish(stats, d, "algo2")
    return r


# ---------------------------------------------------------------------------
# weighted


def partition_V_parametric(U, V, d, I: RadiusInterval, orient: int | None = None):
    """partition_V for the unknown optimal radius.

    Halves of U are tested against V one recursion level at a time, all
    subproblems of a level in one batch.  Returns (lists of V positions per
    site, shrunk interval).
    """
    from .envelope import solve_batch
    from .sssp import infer_orientation

    U = np.asarray(U, dtype=np.float64).reshape(-1, 2)
    V = np.asarray(V, dtype=np.float64).reshape(-1, 2)
    M = len(U)
    out: list[list[int]] = [[] for _ in range(M)]
    if M == 0 or len(V) == 0:
        return out, I
    o = infer_orientation(U, V) if orient is None else orient
    pts = np.vstack([U, V])
    xs, ys = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])
    level = [(0, M, np.arange(M, M + len(V)))]
    while level:
        subs, meta = [], []
        nxt = []
        for a, b, vs in level:
            if vs.size == 0:
                continue
            if b - a == 1 and a < M - 1:
                # reached through a first half that holds every earlier site
                out[a].extend((vs - M).tolist())
                continue
            h = a + (b - a) // 2 if b - a > 1 else None
            subs.append(SubInstance.build(xs, ys, np.arange(a, h if h is not None else b), vs, o))
            meta.append((a, b, h))
        if not subs:
            break
        flags, I = solve_batch(subs, d, I, source="partition_V_parametric")
        for sub, f, (a, b, h) in zip(subs, flags, meta):
            hit, miss = sub.blue_ids[f], sub.blue_ids[~f]
            if h is None:
                out[a].extend((hit - M).tolist())
            else:
                nxt.append((a, h, hit))
                nxt.append((h, b, miss))
        level = nxt
    for lst in out:
        lst.sort()
    return out, I


def _check_weighted(inst: RspInstance) -> None:
    if not inst.weighted:
        raise ValueError("this solver handles the weighted problem")


def rsp_weighted(inst: RspInstance, threshold: float | None = None, *, stats: SolverStats | None = None,
                 oracle: DecisionOracle | None = None, grid_method: str = "fj") -> float:
    """Parametric run of the patch-based Dijkstra variant."""
    _check_weighted(inst)
    d = oracle or inst.oracle(Metric.L2)
    zero, grid, I = _start(inst, d, grid_method)
    if zero is not None:
        _finish(stats, d, "weighted")
        return zero
    tau = weighted_threshold(inst.P.n) if threshold is None else threshold
    classes = CellClass.of(grid, tau)
    I = small_pair_preprocess(_small_pairs(grid, classes, inst.P.xs, inst.P.ys), d, I)
    if classes.large:
        I = _parametric_wx(inst, grid, I, d, classes, stats)
    r = verify_rstar(I.hi, inst.P, Metric.L2, d)
    _finish(stats, d, "weighted")
    return r


def _parametric_wx(inst: RspInstance, grid: Grid, I: RadiusInterval, d, classes: CellClass,
                   stats: SolverStats | None) -> RadiusInterval:
    P = inst.P
    xy = np.column_stack([P.xs, P.ys])
    n = P.n
    dist = np.full(n, math.inf)
    dist[inst.s] = 0.0
    inq = np.ones(n, bool)
    heap = [(0.0, inst.s)]
    t_cell = None if inst.single_source else grid.cell_of[inst.t]
    steps = 0

    def relax(targets: np.ndarray, best: np.ndarray) -> None:
        better = best < dist[targets]
        for q, v in zip(targets[better].tolist(), best[better].tolist()):
            dist[q] = v
            heapq.heappush(heap, (v, q))

    while heap:
        dz, z = heapq.heappop(heap)
        if not inq[z] or dz != dist[z]:
            continue
        steps += 1
        cz = grid.cell_of[z]
        qz = grid.occupied[cz]
        qz = qz[inq[qz]]
        patch = np.concatenate([grid.occupied[c] for c in [cz, *grid.neighbors[cz]]])
        patch = patch[inq[patch]]
        # first update over the whole patch, weights fixed beforehand
        w = dist[patch]
        relax(qz, (w[None, :] + _cross(xy[qz], xy[patch])).min(axis=1))
        # own cell: every pair is an edge
        w = dist[qz]
        relax(qz, (w[None, :] + _cross(xy[qz], xy[qz])).min(axis=1))
        order = np.lexsort((qz, dist[qz]))
        U = qz[order]
        wu = dist[U]
        for c2 in grid.neighbors[cz]:
            vs = grid.occupied[c2]
            vs = vs[inq[vs]]
            if vs.size == 0:
                continue
            o = int(orientation(c2[0] - cz[0], c2[1] - cz[1]))
            if classes.pair_large(cz, c2):
                parts, I = partition_V_parametric(xy[U], xy[vs], d, I, o)
            else:
                parts = partition_V(xy[U], xy[vs], I.midpoint(), o)
            for i, part in enumerate(parts):
                if part:
                    tv = vs[np.array(part, dtype=np.int64)]
                    relax(tv, (wu[None, i:] + _cross(xy[tv], xy[U[i:]])).min(axis=1))
        inq[qz] = False
        if t_cell is not None and cz == t_cell:
            break
    if stats is not None:
        stats.steps = steps
    return I


def solve(inst: RspInstance, algo: str = "auto", m: Metric | str = Metric.L2, **kw) -> float:
    """Dispatch by algorithm name."""
    m = Metric.parse(m)
    if algo == "baseline":
        return rsp_baseline(inst, m, **kw)
    if m is Metric.L1 or algo == "l1":
        from .rsp_l1 import rsp_l1

        return rsp_l1(inst, **kw)
    if algo == "auto":
        algo = "weighted" if inst.weighted else "algo2"
    if algo == "algo1":
        return rsp_unweighted_algo1(inst, **kw)
    if algo == "algo2":
        return rsp_unweighted_algo2(inst, **kw)
    if algo == "weighted":
        return rsp_weighted(inst, **kw)
    raise ValueError(f"unknown algorithm {algo!r}")
