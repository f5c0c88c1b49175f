"""Reverse shortest path and distance selection under the L1 metric.

After rotating by 45 degrees, L1 distance becomes L-infinity distance, so
the points at distance (a, b] from p form a square annulus made of four
rectangles.  A two-level range tree splits every rectangle into canonical
subsets; grouping query points by canonical subset expresses all pairwise
distances inside the current interval as a union of complete bipartite
products.  Each product is replaced by a sparse random bipartite graph, and
a binary search over just those edge lengths shrinks the interval by a
constant factor per stage.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._nb import jit
from .core_geom import (
    DecisionOracle, Metric, PointSet, RadiusInterval, emit_interval, interval_shrink,
    max_pairwise_distance, verify_rstar,
)
from .rsp_l2 import RspInstance, SolverStats, precheck

DEFAULT_DEGREE = 64
# live edge lengths kept in memory per pass before sampling kicks in
_STAGE_CAP = 1 << 22


@dataclass(frozen=True, eq=False)
class RotatedPointSet:
    """u = x + y, v = x - y; original coordinates kept for exact distances."""

    u: np.ndarray
    v: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    integer_mode: bool
    slack: float

    @property
    def n(self) -> int:
        return int(self.u.size)

    def linf(self, i: int, j: int) -> float:
        return float(max(abs(self.u[i] - self.u[j]), abs(self.v[i] - self.v[j])))


def rotate45(P: PointSet) -> RotatedPointSet:
    u = P.xs + P.ys
    v = P.xs - P.ys
    if P.integer_mode or P.n == 0:
        slack = 0.0
    else:
        scale = float(max(np.abs(u).max(), np.abs(v).max(), 1.0))
        slack = 16.0 * np.finfo(np.float64).eps * scale
    return RotatedPointSet(u, v, P.xs, P.ys, P.integer_mode, slack)


# ---------------------------------------------------------------------------
# rectangles


@dataclass(frozen=True)
class Rect:
    """Axis-parallel rectangle in (u, v); each side may be open."""

    u0: float
    u1: float
    v0: float
    v1: float
    u0_open: bool = False
    u1_open: bool = False
    v0_open: bool = False
    v1_open: bool = False

    def contains(self, u: float, v: float) -> bool:
        ok_u = (u > self.u0 if self.u0_open else u >= self.u0) and (u < self.u1 if self.u1_open else u <= self.u1)
        ok_v = (v > self.v0 if self.v0_open else v >= self.v0) and (v < self.v1 if self.v1_open else v <= self.v1)
        return ok_u and ok_v

    def closed(self, integer: bool) -> tuple[float, float, float, float]:
        """Equivalent closed bounds for the coordinates that can occur."""
        def lo(x, op):
            if not op:
                return x
            return math.floor(x) + 1.0 if integer else float(np.nextafter(x, math.inf))

        def hi(x, op):
            if not op:
                return x
            return math.ceil(x) - 1.0 if integer else float(np.nextafter(x, -math.inf))

        return lo(self.u0, self.u0_open), hi(self.u1, self.u1_open), lo(self.v0, self.v0_open), hi(self.v1, self.v1_open)

    def empty(self, integer: bool = False) -> bool:
        u0, u1, v0, v1 = self.closed(integer)
        return u0 > u1 or v0 > v1


def clamp_hi(rot: RotatedPointSet, hi: float) -> float:
    """Replace an infinite upper radius by the data extent."""
    if math.isfinite(hi) or rot.n == 0:
        return hi
    return float(max(rot.u.max() - rot.u.min(), rot.v.max() - rot.v.min())) + 1.0


def annulus_rects(p, I: RadiusInterval, rot: RotatedPointSet | None = None, integer: bool = False) -> list[Rect]:
    """The four disjoint rectangles of {q : I.lo < Linf(p, q) <= I.hi}.

    ``p`` is a rotated point (u, v).  Empty rectangles are omitted.
    """
    pu, pv = float(p[0]), float(p[1])
    a = I.lo
    b = clamp_hi(rot, I.hi) if rot is not None else I.hi
    if not math.isfinite(b):
        raise ValueError("an infinite interval needs the point set for clamping")
    if integer and rot is None:
        integer = float(pu).is_integer() and float(pv).is_integer()
    integer = integer or (rot is not None and rot.integer_mode)
    if integer:
        a, b = float(math.floor(a)), float(math.floor(b))
    rects = [
        Rect(pu - b, pu - a, pv - b, pv + b, u1_open=True),
        Rect(pu + a, pu + b, pv - b, pv + b, u0_open=True),
        Rect(pu - a, pu + a, pv + a, pv + b, v0_open=True),
        Rect(pu - a, pu + a, pv - b, pv - a, v1_open=True),
    ]
    return [R for R in rects if not R.empty(integer)]


@jit
def _annulus_closed(pu, pv, a, b, integer, widen):
    """Closed bounds of the four annulus rectangles, one row each.

    The rectangles partition box(b) minus box(a), where box(x) is the closed
    square with the computed corners pu - x, pu + x, pv - x, pv + x.  With
    real coordinates the strip edges step one float past the computed hole
    edges, so the partition holds in floating point too.  A negative inner
    radius (after widening) leaves no hole.
    """
    out = np.empty((4, 4), np.float64)
    a = a - widen
    b = b + widen
    if integer:
        # integer distances: d <= b iff d <= floor(b), which also keeps
        # pu + b from rounding past a coordinate
        b = math.floor(b)
    for k in range(1, 4):
        out[k, 0] = 1.0
        out[k, 1] = 0.0
        out[k, 2] = 1.0
        out[k, 3] = 0.0
    if a < 0:
        out[0, 0] = pu - b
        out[0, 1] = pu + b
        out[0, 2] = pv - b
        out[0, 3] = pv + b
        return out
    if integer:
        ai = math.floor(a)
        ul = pu - ai
        ur = pu + ai
        vl = pv - ai
        vh = pv + ai
        ul_out = ul - 1.0
        ur_out = ur + 1.0
        vl_out = vl - 1.0
        vh_out = vh + 1.0
    else:
        ul = pu - a
        ur = pu + a
        vl = pv - a
        vh = pv + a
        ul_out = np.nextafter(ul, -np.inf)
        ur_out = np.nextafter(ur, np.inf)
        vl_out = np.nextafter(vl, -np.inf)
        vh_out = np.nextafter(vh, np.inf)
    out[0, 0] = pu - b
    out[0, 1] = ul_out
    out[0, 2] = pv - b
    out[0, 3] = pv + b
    out[1, 0] = ur_out
    out[1, 1] = pu + b
    out[1, 2] = pv - b
    out[1, 3] = pv + b
    out[2, 0] = ul
    out[2, 1] = ur
    out[2, 2] = vh_out
    out[2, 3] = pv + b
    out[3, 0] = ul
    out[3, 1] = ur
    out[3, 2] = pv - b
    out[3, 3] = vl_out
    return out


@jit
def _in_annulus(R, u, v):
    for k in range(4):
        if R[k, 0] <= u <= R[k, 1] and R[k, 2] <= v <= R[k, 3]:
            return True
    return False


# ---------------------------------------------------------------------------
# range tree


@jit
def _build_levels(order, v, H):
    n = order.size
    lvl = np.empty((H + 1, n), np.int64)
    lvl[0, :] = order
    for h in range(1, H + 1):
        size = 1 << h
        half = size >> 1
        for st in range(0, n, size):
            mid = min(st + half, n)
            en = min(st + size, n)
            i = st
            j = mid
            k = st
            while i < mid or j < en:
                if j >= en:
                    take = True
                elif i >= mid:
                    take = False
                else:
                    a = lvl[h - 1, i]
                    b = lvl[h - 1, j]
                    take = v[a] < v[b] or (v[a] == v[b] and a < b)
                if take:
                    lvl[h, k] = lvl[h - 1, i]
                    i += 1
                else:
                    lvl[h, k] = lvl[h - 1, j]
                    j += 1
                k += 1
    lvv = np.empty((H + 1, n), np.float64)
    for h in range(H + 1):
        for k in range(n):
            lvv[h, k] = v[lvl[h, k]]
    return lvl, lvv


@jit
def _lower(arr, lo, hi, x):
    # first index in [lo, hi) with arr[i] >= x
    while lo < hi:
        m = (lo + hi) >> 1
        if arr[m] < x:
            lo = m + 1
        else:
            hi = m
    return lo


@jit
def _upper(arr, lo, hi, x):
    # first index in [lo, hi) with arr[i] > x
    while lo < hi:
        m = (lo + hi) >> 1
        if arr[m] <= x:
            lo = m + 1
        else:
            hi = m
    return lo


@jit
def _largest_block(x, limit):
    """Largest h with x aligned to 2^h and 2^h <= limit."""
    h = 0
    while ((x >> h) & 1) == 0 and (1 << (h + 1)) <= limit and h < 62:
        h += 1
    if x == 0:
        h = 0
        while (1 << (h + 1)) <= limit:
            h += 1
    return h


@jit
def _rect_count(us, lvv, u0, u1, v0, v1):
    n = us.size
    a = _lower(us, 0, n, u0)
    b = _upper(us, 0, n, u1)
    total = 0
    if v0 > v1:
        return 0
    while a < b:
        h = _largest_block(a, b - a)
        row = lvv[h]
        c = _lower(row, a, a + (1 << h), v0)
        e = _upper(row, c, a + (1 << h), v1)
        total += e - c
        a += 1 << h
    return total


@jit
def _rect_ranges(us, lvv, u0, u1, v0, v1, out_h, out_c, out_e):
    """Per primary node: (level, start, end) of the matching v range."""
    n = us.size
    a = _lower(us, 0, n, u0)
    b = _upper(us, 0, n, u1)
    k = 0
    if v0 > v1:
        return 0
    while a < b:
        h = _largest_block(a, b - a)
        row = lvv[h]
        c = _lower(row, a, a + (1 << h), v0)
        e = _upper(row, c, a + (1 << h), v1)
        if e > c:
            out_h[k] = h
            out_c[k] = c
            out_e[k] = e
            k += 1
        a += 1 << h
    return k


@jit
def _rect_canon(us, lvv, base, u0, u1, v0, v1, out, k):
    """Append canonical subset ids covering the rectangle; returns new k."""
    n = us.size
    a = _lower(us, 0, n, u0)
    b = _upper(us, 0, n, u1)
    if v0 > v1:
        return k
    while a < b:
        h = _largest_block(a, b - a)
        row = lvv[h]
        c = _lower(row, a, a + (1 << h), v0)
        e = _upper(row, c, a + (1 << h), v1)
        x = c
        while x < e:
            h2 = _largest_block(x, e - x)
            if h2 > h:
                h2 = h
            out[k] = base[h, h2] + (x >> h2)
            k += 1
            x += 1 << h2
        a += 1 << h
    return k


@dataclass(frozen=True, eq=False)
class RangeTree2D:
    """Primary order on u; at every level, blocks of that order re-sorted by v.

    A canonical subset is an aligned dyadic block of one level's v-sorted
    list lying inside a single primary node.
    """

    us: np.ndarray  # u values in primary order
    lvl: np.ndarray  # (H+1, n) point ids
    lvv: np.ndarray  # (H+1, n) v values
    base: np.ndarray  # (H+1, H+1) first id per (level, block level)
    base_flat: np.ndarray
    base_key: np.ndarray

    @classmethod
    def build(cls, rot: RotatedPointSet) -> "RangeTree2D":
        n = rot.n
        idx = np.arange(n)
        order = np.lexsort((idx, rot.v, rot.u)).astype(np.int64)
        H = max(1, int(math.ceil(math.log2(max(n, 2)))))
        lvl, lvv = _build_levels(order, rot.v, H)
        base = np.full((H + 1, H + 1), -1, np.int64)
        nxt = 0
        keys, firsts = [], []
        for h in range(H + 1):
            for h2 in range(h + 1):
                base[h, h2] = nxt
                keys.append((h, h2))
                firsts.append(nxt)
                nxt += (n + (1 << h2) - 1) >> h2
        return cls(rot.u[order].copy(), lvl, lvv, base, np.array(firsts + [nxt], np.int64),
                   np.array(keys, np.int64))

    @property
    def n(self) -> int:
        return int(self.us.size)

    @property
    def id_space(self) -> int:
        return int(self.base_flat[-1])

    def decode(self, gids):
        """(level, start, size) of canonical ids."""
        gids = np.asarray(gids, dtype=np.int64)
        k = np.searchsorted(self.base_flat, gids, side="right") - 1
        h = self.base_key[k, 0]
        h2 = self.base_key[k, 1]
        start = (gids - self.base_flat[k]) << h2
        size = np.minimum(1 << h2, self.n - start)
        return h, start, size

    def canonical_points(self, gid: int) -> np.ndarray:
        h, st, sz = self.decode([gid])
        return self.lvl[h[0], st[0]:st[0] + sz[0]].copy()


def _closed(R: Rect, integer: bool):
    return R.closed(integer)


def canonical_report(T: RangeTree2D, rect: Rect, integer: bool = False) -> list[int]:
    u0, u1, v0, v1 = _closed(rect, integer)
    out = np.empty(4 * (T.lvl.shape[0] ** 2) + 8, np.int64)
    k = _rect_canon(T.us, T.lvv, T.base, u0, u1, v0, v1, out, 0)
    return out[:k].tolist()


def count_in_rect(T: RangeTree2D, rect: Rect, integer: bool = False) -> int:
    u0, u1, v0, v1 = _closed(rect, integer)
    return int(_rect_count(T.us, T.lvv, u0, u1, v0, v1))


# ---------------------------------------------------------------------------
# whole-set kernels


@jit
def _count_interval(U, V, us, lvv, a, b, integer, widen):
    """Ordered pairs with Linf distance in (a, b]."""
    total = 0
    for p in range(U.size):
        R = _annulus_closed(U[p], V[p], a, b, integer, widen)
        for k in range(4):
            total += _rect_count(us, lvv, R[k, 0], R[k, 1], R[k, 2], R[k, 3])
    return total


@jit
def _count_leq(U, V, us, lvv, r):
    total = 0
    for p in range(U.size):
        total += _rect_count(us, lvv, U[p] - r, U[p] + r, V[p] - r, V[p] + r) - 1
    return total


@jit
def _report(U, V, X, Y, us, lvl, lvv, a, b, integer, widen, lo, hi, fill, out):
    """Exact L1 distances in (lo, hi] of unordered pairs from the annuli.

    With ``fill`` false only counts; otherwise writes into ``out``.
    """
    H = lvl.shape[0]
    oh = np.empty(2 * H + 2, np.int64)
    oc = np.empty(2 * H + 2, np.int64)
    oe = np.empty(2 * H + 2, np.int64)
    k = 0
    for p in range(U.size):
        R = _annulus_closed(U[p], V[p], a, b, integer, widen)
        for t in range(4):
            m = _rect_ranges(us, lvv, R[t, 0], R[t, 1], R[t, 2], R[t, 3], oh, oc, oe)
            for z in range(m):
                row = lvl[oh[z]]
                for x in range(oc[z], oe[z]):
                    q = row[x]
                    if q <= p:
                        continue
                    w = abs(X[p] - X[q]) + abs(Y[p] - Y[q])
                    if w > lo and w <= hi:
                        if fill:
                            out[k] = w
                        k += 1
    return k


@jit
def _shell_pairs(U, V, X, Y, us, lvl, lvv, a, b, s, lo, hi, fill, outp, outq):
    """Ordered pairs (p, q) with exact L1 distance in (lo, hi] whose q lies
    outside p's annulus for (a + s, b - s]; those are the pairs that the
    inner annulus cannot settle under rounding."""
    n = U.size
    H = lvl.shape[0]
    oh = np.empty(2 * H + 2, np.int64)
    oc = np.empty(2 * H + 2, np.int64)
    oe = np.empty(2 * H + 2, np.int64)
    seen = np.full(n, -1, np.int64)
    k = 0
    for p in range(n):
        inner = _annulus_closed(U[p], V[p], a + s, b - s, False, 0.0)
        for f in range(2):
            if f == 0:
                R = _annulus_closed(U[p], V[p], b - s, b + s, False, 0.0)
            else:
                R = _annulus_closed(U[p], V[p], a - s, a + s, False, 0.0)
            for t in range(4):
                m = _rect_ranges(us, lvv, R[t, 0], R[t, 1], R[t, 2], R[t, 3], oh, oc, oe)
                for z in range(m):
                    row = lvl[oh[z]]
                    for x in range(oc[z], oe[z]):
                        q = row[x]
                        if q == p or seen[q] == p:
                            continue
                        seen[q] = p
                        if a + s < b - s and _in_annulus(inner, U[q], V[q]):
                            continue
                        w = abs(X[p] - X[q]) + abs(Y[p] - Y[q])
                        if w > lo and w <= hi:
                            if fill:
                                outp[k] = p
                                outq[k] = q
                            k += 1
    return k


@jit
def _incidences(U, V, us, lvv, base, G, a, b, integer, widen):
    """Invert p -> canonical subsets of p's annulus into CSR by subset."""
    n = U.size
    H = lvv.shape[0]
    scratch = np.empty(4 * H * H + 8, np.int64)
    cnt = np.zeros(G + 1, np.int64)
    for p in range(n):
        R = _annulus_closed(U[p], V[p], a, b, integer, widen)
        k = 0
        for t in range(4):
            k = _rect_canon(us, lvv, base, R[t, 0], R[t, 1], R[t, 2], R[t, 3], scratch, k)
        for i in range(k):
            cnt[scratch[i] + 1] += 1
    ptr = np.cumsum(cnt)
    fill = ptr[:-1].copy()
    pts = np.empty(ptr[-1], np.int64)
    for p in range(n):
        R = _annulus_closed(U[p], V[p], a, b, integer, widen)
        k = 0
        for t in range(4):
            k = _rect_canon(us, lvv, base, R[t, 0], R[t, 1], R[t, 2], R[t, 3], scratch, k)
        for i in range(k):
            g = scratch[i]
            pts[fill[g]] = p
            fill[g] += 1
    used = 0
    for g in range(G):
        if ptr[g + 1] > ptr[g]:
            used += 1
    gids = np.empty(used, np.int64)
    kptr = np.empty(used + 1, np.int64)
    j = 0
    kptr[0] = 0
    for g in range(G):
        if ptr[g + 1] > ptr[g]:
            gids[j] = g
            kptr[j + 1] = kptr[j] + ptr[g + 1] - ptr[g]
            j += 1
    return gids, kptr, pts


@jit
def _rng_init(seed):
    # splitmix64 scramble so nearby seeds give unrelated streams
    z = np.uint64(seed) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    state = np.empty(1, np.uint64)
    state[0] = z if z != np.uint64(0) else np.uint64(1)
    return state


@jit
def _rand_below(state, m):
    """Uniform integer in [0, m) from a xorshift64* stream."""
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    y = x * np.uint64(2685821657736338717)
    return np.int64((y >> np.uint64(32)) % np.uint64(m))


@jit
def _shuffle(perm, sz, state):
    for j in range(sz):
        perm[j] = j
    for j in range(sz - 1, 0, -1):
        i = _rand_below(state, j + 1)
        t = perm[i]
        perm[i] = perm[j]
        perm[j] = t


@jit
def _block_edges(na, nb, d, seed, ea, eb):
    """d balanced rounds between na >= nb vertices."""
    state = _rng_init(seed)
    perm = np.empty(na, np.int64)
    k = 0
    for _ in range(d):
        _shuffle(perm, na, state)
        for j in range(na):
            ea[k] = perm[j]
            eb[k] = j % nb
            k += 1
    return k


@jit
def _stage_values(gids, kptr, kpts, gh, gst, gsz, lvl, X, Y, d, seed, lo, hi, cap):
    """Stream the edge lengths of every (K_g, L_g) product.

    Products with a side of at most d points contribute all pairs; others
    are split into blocks and replaced by d balanced random rounds.  Keeps a
    systematic sample of the lengths strictly inside (lo, hi): all of them
    when the returned stride is 1.
    """
    state = _rng_init(seed)
    buf = np.empty(cap, np.float64)
    nbuf = 0
    stride = 1
    live = 0
    edges = 0
    n = X.size
    perm = np.empty(2 * n + 2, np.int64)
    for gi in range(gids.size):
        K = kpts[kptr[gi]:kptr[gi + 1]]
        L = lvl[gh[gi], gst[gi]:gst[gi] + gsz[gi]]
        if K.size >= L.size:
            big = K
            small = L
        else:
            big = L
            small = K
        nb = big.size
        ns = small.size
        if ns <= d:
            for i in range(nb):
                a = big[i]
                for j in range(ns):
                    q = small[j]
                    w = abs(X[a] - X[q]) + abs(Y[a] - Y[q])
                    edges += 1
                    if w > lo and w < hi:
                        if live % stride == 0:
                            if nbuf == cap:
                                for t in range(cap // 2):
                                    buf[t] = buf[2 * t]
                                nbuf = cap // 2
                                stride *= 2
                            if live % stride == 0:
                                buf[nbuf] = w
                                nbuf += 1
                        live += 1
            continue
        nblocks = nb // ns
        q0 = nb // nblocks
        rem = nb % nblocks
        pos = 0
        for blk in range(nblocks):
            sz = q0 + (1 if blk < rem else 0)
            for _ in range(d):
                _shuffle(perm, sz, state)
                for j in range(sz):
                    a = big[pos + perm[j]]
                    q = small[j % ns]
                    w = abs(X[a] - X[q]) + abs(Y[a] - Y[q])
                    edges += 1
                    if w > lo and w < hi:
                        if live % stride == 0:
                            if nbuf == cap:
                                for t in range(cap // 2):
                                    buf[t] = buf[2 * t]
                                nbuf = cap // 2
                                stride *= 2
                            if live % stride == 0:
                                buf[nbuf] = w
                                nbuf += 1
                        live += 1
            pos += sz
    return buf[:nbuf].copy(), stride, live, edges


# ---------------------------------------------------------------------------
# public pieces


@dataclass(frozen=True, eq=False)
class CanonicalPair:
    """K: query points; L: points of canonical subset ``gid``.

    When ``swapped`` the roles were exchanged because K was the smaller side;
    ``blocks`` partitions the (possibly renamed) K side.
    """

    gid: int
    K: np.ndarray
    L: np.ndarray
    swapped: bool = False
    blocks: tuple = ()

    @property
    def size(self) -> int:
        return int(self.K.size * self.L.size)


def _blocks(m: int, nl: int) -> tuple[tuple[int, int], ...]:
    """Split m >= nl items into consecutive blocks of sizes in [nl, 2 nl)."""
    k = max(1, m // nl)
    q, rem = divmod(m, k)
    out, pos = [], 0
    for i in range(k):
        sz = q + (1 if i < rem else 0)
        out.append((pos, pos + sz))
        pos += sz
    return tuple(out)


def _interval_bounds(rot: RotatedPointSet, I: RadiusInterval) -> tuple[float, float]:
    return float(I.lo), clamp_hi(rot, I.hi)


def _grouped(rot: RotatedPointSet, T: RangeTree2D, I: RadiusInterval) -> dict[int, np.ndarray]:
    """canonical id -> query points whose annulus holds that subset."""
    a, b = _interval_bounds(rot, I)
    if rot.slack == 0.0:
        gids, kptr, kpts = _incidences(rot.u, rot.v, T.us, T.lvv, T.base, T.id_space, a, b, rot.integer_mode, 0.0)
        return {g: kpts[kptr[i]:kptr[i + 1]] for i, g in enumerate(gids.tolist())}
    # rounding in the rotated frame: subsets from the shrunk annulus are
    # certainly inside I; the thin shell is settled pair by pair, each q
    # standing as its own one-point subset
    s = rot.slack
    groups: dict[int, list] = {}
    if a + s < b - s:
        gids, kptr, kpts = _incidences(rot.u, rot.v, T.us, T.lvv, T.base, T.id_space, a + s, b - s, False, 0.0)
        groups = {g: [kpts[kptr[i]:kptr[i + 1]]] for i, g in enumerate(gids.tolist())}
    args = (rot.u, rot.v, rot.xs, rot.ys, T.us, T.lvl, T.lvv, a, b, s, float(I.lo), float(I.hi))
    k = _shell_pairs(*args, False, np.empty(0, np.int64), np.empty(0, np.int64))
    ps, qs = np.empty(k, np.int64), np.empty(k, np.int64)
    _shell_pairs(*args, True, ps, qs)
    if k:
        pos = np.empty(rot.n, np.int64)
        pos[T.lvl[0]] = np.arange(rot.n)
        leaf = int(T.base[0, 0]) + pos[qs]
        order = np.argsort(leaf, kind="stable")
        leaf, ps = leaf[order], ps[order]
        cuts = np.flatnonzero(np.diff(leaf)) + 1
        for chunk_l, chunk_p in zip(np.split(leaf, cuts), np.split(ps, cuts)):
            groups.setdefault(int(chunk_l[0]), []).append(chunk_p)
    return {g: np.concatenate(parts) for g, parts in sorted(groups.items())}


def collect_pairs(rot: RotatedPointSet, T: RangeTree2D, I: RadiusInterval, normalize: bool = True) -> list[CanonicalPair]:
    """Group query points by the canonical subsets of their annuli."""
    groups = _grouped(rot, T, I)
    gids = np.fromiter(groups, dtype=np.int64, count=len(groups))
    h, st, sz = T.decode(gids)
    out = []
    for i, g in enumerate(gids.tolist()):
        K = np.asarray(groups[g], dtype=np.int64).copy()
        L = T.lvl[h[i], st[i]:st[i] + sz[i]].copy()
        if not normalize:
            out.append(CanonicalPair(g, K, L))
            continue
        swapped = K.size < L.size
        if swapped:
            K, L = L, K
        out.append(CanonicalPair(g, K, L, swapped, _blocks(K.size, L.size)))
    return out


@dataclass(frozen=True, eq=False)
class ExpanderEdges:
    a: np.ndarray  # positions in A
    b: np.ndarray  # positions in B
    degree: int
    seed: int

    def __len__(self) -> int:
        return int(self.a.size)

    def degrees(self, na: int, nb: int) -> tuple[np.ndarray, np.ndarray]:
        return np.bincount(self.a, minlength=na), np.bincount(self.b, minlength=nb)


def expander_edges(A, B, d: int, seed: int = 0) -> ExpanderEdges:
    """Union of d random balanced assignments between A and B.

    Every round matches each vertex of the larger side to one vertex of the
    smaller side, cycling through the smaller side so each of its vertices
    receives at most ceil(larger/smaller) edges.  Parallel edges collapse.
    """
    na, nb = len(A), len(B)
    if na == 0 or nb == 0:
        return ExpanderEdges(np.empty(0, np.int64), np.empty(0, np.int64), d, seed)
    big, small = max(na, nb), min(na, nb)
    ea = np.empty(big * d, np.int64)
    eb = np.empty(big * d, np.int64)
    _block_edges(big, small, d, seed, ea, eb)
    if na < nb:
        ea, eb = eb, ea
    pairs = np.unique(np.stack([ea, eb], axis=1), axis=0)
    return ExpanderEdges(pairs[:, 0].copy(), pairs[:, 1].copy(), d, seed)


def count_pairs_leq(rot: RotatedPointSet, T: RangeTree2D, r: float) -> int:
    """Unordered pairs at L1 distance at most r."""
    if r < 0:
        return 0
    if rot.slack == 0.0:
        r = float(math.floor(r)) if rot.integer_mode else float(r)
        return int(_count_leq(rot.u, rot.v, T.us, T.lvv, r)) // 2
    # rounding in the rotated frame: settle the thin shell exactly
    inner = float(r) - rot.slack
    if inner > 0:
        base = int(_count_leq(rot.u, rot.v, T.us, T.lvv, inner)) // 2
        a, lo = inner, -1.0
    else:
        # no safe inner box: scan the whole box, exact zeros counted apart
        base = _coincident_pairs(rot)
        a, lo = -1.0, 0.0
    shell = _report(rot.u, rot.v, rot.xs, rot.ys, T.us, T.lvl, T.lvv, a, float(r) + rot.slack, False, 0.0,
                    lo, float(r), False, np.empty(0))
    return base + int(shell)


def _coincident_pairs(rot: RotatedPointSet) -> int:
    xy = np.column_stack([rot.xs, rot.ys])
    _, counts = np.unique(xy, axis=0, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def _report_values(rot: RotatedPointSet, T: RangeTree2D, a: float, b: float, lo: float, hi: float,
                   widen: float) -> np.ndarray:
    args = (rot.u, rot.v, rot.xs, rot.ys, T.us, T.lvl, T.lvv, a, b, rot.integer_mode, widen, lo, hi)
    k = _report(*args, False, np.empty(0))
    out = np.empty(k)
    _report(*args, True, out)
    return out


def window_values(P: PointSet, lo: float, hi: float) -> np.ndarray:
    """Distinct L1 distances in [lo, hi] (lo > 0) by range reporting."""
    rot = rotate45(P)
    T = RangeTree2D.build(rot)
    below = float(np.nextafter(lo, -math.inf))
    if rot.integer_mode:
        a = float(math.ceil(lo) - 1)
    else:
        a = below
    return np.unique(_report_values(rot, T, max(a, 0.0), hi, below, hi, rot.slack))


@dataclass
class StageConfig:
    degree: int = DEFAULT_DEGREE
    seed: int = 0
    stage_cap: int | None = None


def _shrink_stage(rot: RotatedPointSet, T: RangeTree2D, I: RadiusInterval, d, cfg: StageConfig, stage: int):
    a, b = _interval_bounds(rot, I)
    gids, kptr, kpts = _incidences(rot.u, rot.v, T.us, T.lvv, T.base, T.id_space, a, b, rot.integer_mode, rot.slack)
    gh, gst, gsz = T.decode(gids)
    seed = (cfg.seed * 1_000_003 + stage) % (2**31)
    while True:
        vals, stride, live, _ = _stage_values(gids, kptr, kpts, gh, gst, gsz, T.lvl, rot.xs, rot.ys,
                                              cfg.degree, seed, I.lo, I.hi, _STAGE_CAP)
        I = interval_shrink(I, vals, d)
        if stride == 1:
            return I


def _stage_search(rot: RotatedPointSet, T: RangeTree2D, I: RadiusInterval, d, cfg: StageConfig,
                  stats: SolverStats | None, source: str) -> RadiusInterval:
    n = rot.n
    cap = cfg.stage_cap if cfg.stage_cap is not None else int(4 * math.log2(max(n, 2)))
    count = _pairs_in(rot, T, I)
    counts = [count]
    j = 0
    fallback = False
    while count > n:
        if j >= cap:
            fallback = True
            break
        j += 1
        I = _shrink_stage(rot, T, I, d, cfg, j)
        emit_interval(I, source)
        count = _pairs_in(rot, T, I)
        counts.append(count)
    a, b = _interval_bounds(rot, I)
    vals = _report_values(rot, T, a, b, I.lo, I.hi, rot.slack)
    I = interval_shrink(I, vals, d)
    emit_interval(I, source)
    if stats is not None:
        stats.stages = j
        stats.stage_counts = counts
        stats.fallback = fallback
    return I


def _pairs_in(rot: RotatedPointSet, T: RangeTree2D, I: RadiusInterval) -> int:
    a, b = _interval_bounds(rot, I)
    return int(_count_interval(rot.u, rot.v, T.us, T.lvv, a, b, rot.integer_mode, 0.0)) // 2


def pairs_in_interval(rot: RotatedPointSet, T: RangeTree2D, I: RadiusInterval) -> int:
    """|distances in I| counted through the annulus rectangles."""
    return _pairs_in(rot, T, I)


def rsp_l1(inst: RspInstance, *, degree: int = DEFAULT_DEGREE, seed: int = 0, stage_cap: int | None = None,
           stats: SolverStats | None = None, oracle: DecisionOracle | None = None) -> float:
    """Smallest L1 radius meeting the bound, by stage-wise interval contraction."""
    P = inst.P
    d = oracle or inst.oracle(Metric.L1)
    zero = precheck(inst, Metric.L1, d)
    if zero is not None:
        _done(stats, d, "l1")
        return zero
    rot = rotate45(P)
    T = RangeTree2D.build(rot)
    I = emit_interval(RadiusInterval(0.0, max_pairwise_distance(P, Metric.L1)), "start")
    I = _stage_search(rot, T, I, d, StageConfig(degree, seed, stage_cap), stats, "rsp_l1_stage")
    r = verify_rstar(I.hi, P, Metric.L1, d)
    _done(stats, d, "l1")
    return r


def _done(stats: SolverStats | None, d: DecisionOracle, name: str) -> None:
    if stats is not None:
        stats.algorithm = stats.algorithm or name
        stats.oracle_calls = d.call_count


def l1_distance_select(P: PointSet, k: int, *, degree: int = DEFAULT_DEGREE, seed: int = 0,
                       stage_cap: int | None = None, stats: SolverStats | None = None) -> float:
    """k-th smallest L1 distance among all unordered pairs (1-based)."""
    n = P.n
    total = n * (n - 1) // 2
    if not 1 <= k <= total:
        raise ValueError(f"k={k} outside 1..{total}")
    rot = rotate45(P)
    T = RangeTree2D.build(rot)
    d = DecisionOracle(lambda r: count_pairs_leq(rot, T, r) >= k, name="count")
    if d(0.0):
        _done(stats, d, "select")
        return 0.0
    I = RadiusInterval(0.0, max_pairwise_distance(P, Metric.L1))
    I = _stage_search(rot, T, I, d, StageConfig(degree, seed, stage_cap), stats, "l1_select_stage")
    _done(stats, d, "select")
    hi = I.hi
    return float(int(hi)) if P.integer_mode and float(hi).is_integer() else float(hi)
