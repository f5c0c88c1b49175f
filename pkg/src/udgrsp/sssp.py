"""Shortest paths in unit-disk graphs and the decision oracles built on them.

The fast routines never materialize the graph: points are bucketed into a
grid, and edges between neighbouring cells are found with arc envelopes
(L2) or a sliding window maximum (L1, in coordinates rotated by 45 degrees
where L1 balls become squares).
"""
from __future__ import annotations

import heapq
import math
import os
from dataclasses import dataclass

import numpy as np

from ._nb import jit
from .core_geom import Metric, OracleCapError, PointSet, DecisionOracle
from .envelope import env_build, env_flags, env_query, piece_ends

INF = math.inf


def oracle_cap() -> int:
    return int(os.environ.get("UDG_ORACLE_CAP", "4096"))


@dataclass(frozen=True, eq=False)
class DistArray:
    """Per-point distance from the source; inf marks unreachable points."""

    values: np.ndarray
    source: int

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self) -> int:
        return int(self.values.size)

    def tolist(self) -> list:
        return [int(v) if math.isfinite(v) and float(v).is_integer() else float(v) for v in self.values]

    def max(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0


# ---------------------------------------------------------------------------
# grid bucketing shared by all kernels


@jit
def _prune_range(vals, order, sv, r):
    n = order.size
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if vals[order[mid]] < sv:
            lo = mid + 1
        else:
            hi = mid
    pos = lo
    vhi = vals[order[n - 1]]
    for k in range(pos, n - 1):
        if vals[order[k + 1]] - vals[order[k]] > r:
            vhi = vals[order[k]]
            break
    j = pos
    while j + 1 < n and vals[order[j + 1]] == sv:
        j += 1
    vlo = vals[order[0]]
    for k in range(j, 0, -1):
        if vals[order[k]] - vals[order[k - 1]] > r:
            vlo = vals[order[k]]
            break
    return vlo, vhi


@jit
def grid_cells(X, Y, oX, oY, s, r, side, prune):
    """Bucket points into square cells anchored at point s.

    Returns (cell per point or -1, sorted cell keys, cell offsets, members
    sorted by X, members sorted by Y, nrows, ncols, dense lookup table or
    an empty array).
    """
    n = X.size
    sx = X[s]
    sy = Y[s]
    xlo, xhi, ylo, yhi = -np.inf, np.inf, -np.inf, np.inf
    if prune:
        xlo, xhi = _prune_range(X, oX, sx, r)
        ylo, yhi = _prune_range(Y, oY, sy, r)
    col = np.empty(n, np.int64)
    row = np.empty(n, np.int64)
    live = np.zeros(n, np.bool_)
    cmin = np.iinfo(np.int64).max
    cmax = np.iinfo(np.int64).min
    rmin = cmin
    rmax = cmax
    for i in range(n):
        if X[i] >= xlo and X[i] <= xhi and Y[i] >= ylo and Y[i] <= yhi:
            live[i] = True
            c = np.int64(math.floor((X[i] - sx) / side))
            rr = np.int64(math.floor((Y[i] - sy) / side))
            col[i] = c
            row[i] = rr
            if c < cmin:
                cmin = c
            if c > cmax:
                cmax = c
            if rr < rmin:
                rmin = rr
            if rr > rmax:
                rmax = rr
    ncols = cmax - cmin + 1
    nrows = rmax - rmin + 1
    key = np.full(n, -1, np.int64)
    nl = 0
    for i in range(n):
        if live[i]:
            key[i] = (row[i] - rmin) * ncols + (col[i] - cmin)
            nl += 1
    ks = np.empty(nl, np.int64)
    t = 0
    for i in range(n):
        if live[i]:
            ks[t] = key[i]
            t += 1
    ks.sort()
    m = 0
    for i in range(nl):
        if i == 0 or ks[i] != ks[i - 1]:
            ks[m] = ks[i]
            m += 1
    ckey = ks[:m].copy()
    dense = nrows * ncols <= 4 * n + 64
    table = np.empty(0, np.int64)
    if dense:
        table = np.full(nrows * ncols, -1, np.int64)
        for c in range(m):
            table[ckey[c]] = c
    cell = np.full(n, -1, np.int64)
    cnt = np.zeros(m + 1, np.int64)
    for i in range(n):
        if live[i]:
            if dense:
                c = table[key[i]]
            else:
                c = np.searchsorted(ckey, key[i])
            cell[i] = c
            cnt[c + 1] += 1
    cptr = np.cumsum(cnt)
    fill = cptr[:-1].copy()
    cpx = np.empty(nl, np.int64)
    for k in range(n):
        i = oX[k]
        c = cell[i]
        if c >= 0:
            cpx[fill[c]] = i
            fill[c] += 1
    fill = cptr[:-1].copy()
    cpy = np.empty(nl, np.int64)
    for k in range(n):
        i = oY[k]
        c = cell[i]
        if c >= 0:
            cpy[fill[c]] = i
            fill[c] += 1
    return cell, ckey, cptr, cpx, cpy, nrows, ncols, table


@jit
def find_cell(rr, cc, nrows, ncols, ckey, table):
    if rr < 0 or cc < 0 or rr >= nrows or cc >= ncols:
        return -1
    key = rr * ncols + cc
    if table.size > 0:
        return table[key]
    lo = 0
    hi = ckey.size
    while lo < hi:
        mid = (lo + hi) // 2
        if ckey[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < ckey.size and ckey[lo] == key:
        return lo
    return -1


@jit
def orientation(dr, dc):
    """Frame code for a neighbour cell at row/col offset (dr, dc)."""
    if dr != 0 and abs(dr) >= abs(dc):
        return 0 if dr > 0 else 1
    return 2 if dc > 0 else 3


@jit
def canon(X, Y, p, orient):
    if orient == 0:
        return X[p], Y[p]
    if orient == 1:
        return X[p], -Y[p]
    if orient == 2:
        return Y[p], X[p]
    return Y[p], -X[p]


# ---------------------------------------------------------------------------
# unweighted L2: grid BFS


@jit
def cs_bfs_kernel(X, Y, oX, oY, s, r, target, lam):
    """Hop distances (-1 unreachable).  Stops early once ``target`` is
    reached or after ``lam`` levels when those are non-negative."""
    n = X.size
    side = r / math.sqrt(2.0)
    cell, ckey, cptr, cpx, cpy, nrows, ncols, table = grid_cells(X, Y, oX, oY, s, r, side, True)
    m = ckey.size
    level = np.full(n, -1, np.int64)
    level[s] = 0
    ucount = np.empty(m, np.int64)
    for c in range(m):
        ucount[c] = cptr[c + 1] - cptr[c]
    ucount[cell[s]] -= 1
    front = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    front[0] = s
    fsize = 1
    stamp = np.full(m, -1, np.int64)
    fcells = np.empty(m, np.int64)
    rx = np.empty(n, np.float64)
    ry = np.empty(n, np.float64)
    bx = np.empty(n, np.float64)
    by = np.empty(n, np.float64)
    bid = np.empty(n, np.int64)
    pred = np.empty(n, np.int64)
    pstart = np.empty(n, np.float64)
    pright = np.empty(n, np.float64)
    pend = np.empty(n, np.float64)
    skind = np.empty(n, np.int64)
    span = np.empty(n, np.int64)
    flag = np.empty(n, np.bool_)
    i = 0
    while fsize > 0:
        i += 1
        if lam >= 0 and i > lam:
            break
        nf = 0
        nc = 0
        for k in range(fsize):
            c = cell[front[k]]
            if stamp[c] != i:
                stamp[c] = i
                fcells[nc] = c
                nc += 1
        for k in range(nc):
            c = fcells[k]
            for t in range(cptr[c], cptr[c + 1]):
                q = cpx[t]
                if level[q] == -1:
                    level[q] = i
                    ucount[c] -= 1
                    nxt[nf] = q
                    nf += 1
        for k in range(nc):
            c = fcells[k]
            rr = ckey[c] // ncols
            cc = ckey[c] % ncols
            for dr in range(-2, 3):
                for dc in range(-2, 3):
                    if dr == 0 and dc == 0:
                        continue
                    c2 = find_cell(rr + dr, cc + dc, nrows, ncols, ckey, table)
                    if c2 < 0 or ucount[c2] == 0:
                        continue
                    o = orientation(dr, dc)
                    lst = cpx if o < 2 else cpy
                    nr = 0
                    top = -np.inf
                    for t in range(cptr[c], cptr[c + 1]):
                        p = lst[t]
                        if level[p] == i - 1:
                            a, b = canon(X, Y, p, o)
                            rx[nr] = a
                            ry[nr] = b
                            if b > top:
                                top = b
                            nr += 1
                    nb = 0
                    low = np.inf
                    for t in range(cptr[c2], cptr[c2 + 1]):
                        p = lst[t]
                        if level[p] == -1:
                            a, b = canon(X, Y, p, o)
                            bx[nb] = a
                            by[nb] = b
                            bid[nb] = p
                            if b < low:
                                low = b
                            nb += 1
                    if nr == 0 or nb == 0:
                        continue
                    L = 0.5 * (top + low)
                    npc = env_build(rx[:nr], ry[:nr], L, r, pred, pstart, pright, skind)
                    piece_ends(pstart, pright, npc, pend)
                    env_query(rx[:nr], ry[:nr], pred, pstart, pend, npc, bx[:nb], by[:nb], r, span, flag)
                    for j in range(nb):
                        if flag[j]:
                            q = bid[j]
                            level[q] = i
                            ucount[c2] -= 1
                            nxt[nf] = q
                            nf += 1
        tmp = front
        front = nxt
        nxt = tmp
        fsize = nf
        if target >= 0 and level[target] >= 0:
            break
    return level


# ---------------------------------------------------------------------------
# binary heap on (key, index) pairs


@jit
def _heap_push(hk, hi, size, key, idx):
    if size == hk.size:
        nk = np.empty(2 * hk.size, np.float64)
        ni = np.empty(2 * hk.size, np.int64)
        nk[:size] = hk[:size]
        ni[:size] = hi[:size]
        hk = nk
        hi = ni
    j = size
    hk[j] = key
    hi[j] = idx
    while j > 0:
        p = (j - 1) // 2
        if hk[p] > hk[j] or (hk[p] == hk[j] and hi[p] > hi[j]):
            hk[p], hk[j] = hk[j], hk[p]
            hi[p], hi[j] = hi[j], hi[p]
            j = p
        else:
            break
    return hk, hi, size + 1


@jit
def _heap_pop(hk, hi, size):
    key = hk[0]
    idx = hi[0]
    size -= 1
    hk[0] = hk[size]
    hi[0] = hi[size]
    j = 0
    while True:
        a = 2 * j + 1
        b = a + 1
        m = j
        if a < size and (hk[a] < hk[m] or (hk[a] == hk[m] and hi[a] < hi[m])):
            m = a
        if b < size and (hk[b] < hk[m] or (hk[b] == hk[m] and hi[b] < hi[m])):
            m = b
        if m == j:
            break
        hk[m], hk[j] = hk[j], hk[m]
        hi[m], hi[j] = hi[j], hi[m]
        j = m
    return key, idx, size


# ---------------------------------------------------------------------------
# weighted L2: the patch-based main loop


@jit
def _d2(X, Y, a, b):
    dx = X[a] - X[b]
    dy = Y[a] - Y[b]
    return math.sqrt(dx * dx + dy * dy)


@jit
def _insertion_sort_by_dist(u, nu, dist):
    for a in range(1, nu):
        x = u[a]
        b = a - 1
        while b >= 0 and (dist[u[b]] > dist[x] or (dist[u[b]] == dist[x] and u[b] > x)):
            u[b + 1] = u[b]
            b -= 1
        u[b + 1] = x


@jit
def wx_kernel(X, Y, oX, oY, s, r, target):
    """Weighted distances; stops after the target's cell leaves the queue
    when ``target`` is non-negative."""
    n = X.size
    side = r / math.sqrt(2.0)
    cell, ckey, cptr, cpx, cpy, nrows, ncols, table = grid_cells(X, Y, oX, oY, s, r, side, True)
    dist = np.full(n, np.inf)
    dist[s] = 0.0
    inq = cell >= 0
    hk = np.empty(max(16, n), np.float64)
    hi = np.empty(max(16, n), np.int64)
    hk, hi, hs = _heap_push(hk, hi, 0, 0.0, s)
    patch = np.empty(n, np.int64)
    w = np.empty(n, np.float64)
    qz = np.empty(n, np.int64)
    u = np.empty(n, np.int64)
    iv = np.empty(n, np.int64)
    vv = np.empty(n, np.int64)
    pcells = np.empty(25, np.int64)
    while hs > 0:
        dz, z, hs = _heap_pop(hk, hi, hs)
        if not inq[z] or dz != dist[z]:
            continue
        cz = cell[z]
        rr = ckey[cz] // ncols
        cc = ckey[cz] % ncols
        npc = 0
        for dr in range(-2, 3):
            for dc in range(-2, 3):
                c2 = find_cell(rr + dr, cc + dc, nrows, ncols, ckey, table)
                if c2 >= 0:
                    pcells[npc] = c2
                    npc += 1
        npt = 0
        for k in range(npc):
            c2 = pcells[k]
            for t in range(cptr[c2], cptr[c2 + 1]):
                p = cpx[t]
                if inq[p]:
                    patch[npt] = p
                    w[npt] = dist[p]
                    npt += 1
        nz = 0
        for t in range(cptr[cz], cptr[cz + 1]):
            p = cpx[t]
            if inq[p]:
                qz[nz] = p
                nz += 1
        # first update: nearest additively weighted site over the patch
        for a in range(nz):
            v = qz[a]
            best = dist[v]
            for b in range(npt):
                if w[b] < best:
                    val = w[b] + _d2(X, Y, patch[b], v)
                    if val < best:
                        best = val
            if best < dist[v]:
                dist[v] = best
                hk, hi, hs = _heap_push(hk, hi, hs, best, v)
        # second update, own cell: any two points are adjacent
        for a in range(nz):
            w[a] = dist[qz[a]]
        for a in range(nz):
            v = qz[a]
            best = dist[v]
            for b in range(nz):
                if w[b] < best:
                    val = w[b] + _d2(X, Y, qz[b], v)
                    if val < best:
                        best = val
            if best < dist[v]:
                dist[v] = best
                hk, hi, hs = _heap_push(hk, hi, hs, best, v)
        # second update, other cells of the patch
        for a in range(nz):
            u[a] = qz[a]
        _insertion_sort_by_dist(u, nz, dist)
        for a in range(nz):
            w[a] = dist[u[a]]
        for k in range(npc):
            c2 = pcells[k]
            if c2 == cz:
                continue
            nv = 0
            for t in range(cptr[c2], cptr[c2 + 1]):
                p = cpx[t]
                if inq[p]:
                    vv[nv] = p
                    nv += 1
            if nv == 0:
                continue
            # step 2: first site (in dist order) whose disk holds v
            for b in range(nv):
                iv[b] = -1
                for a in range(nz):
                    if _d2(X, Y, u[a], vv[b]) <= r:
                        iv[b] = a
                        break
            # step 3: sites from the first hit onward
            for b in range(nv):
                if iv[b] < 0:
                    continue
                v = vv[b]
                best = dist[v]
                for a in range(iv[b], nz):
                    if w[a] < best:
                        val = w[a] + _d2(X, Y, u[a], v)
                        if val < best:
                            best = val
                if best < dist[v]:
                    dist[v] = best
                    hk, hi, hs = _heap_push(hk, hi, hs, best, v)
        for a in range(nz):
            inq[qz[a]] = False
        if target >= 0 and cell[target] == cz:
            break
    return dist


# ---------------------------------------------------------------------------
# L1 kernels in rotated coordinates (u = x + y, v = x - y)


@jit
def _window_hits(rx, ry, nr, bx, by, nb, r, slack, flag, amb):
    """For x-sorted reds and blues above them: is some red within
    L-infinity distance r.  With a positive slack, blues too close to call
    are marked ambiguous instead."""
    dq = np.empty(nr, np.int64)
    for pass_ in range(2 if slack > 0 else 1):
        e = slack if pass_ == 0 else -slack
        head = 0
        tail = 0
        lo = 0
        hi = 0
        for j in range(nb):
            while hi < nr and rx[hi] - bx[j] <= r + e:
                while tail > head and ry[dq[tail - 1]] <= ry[hi]:
                    tail -= 1
                dq[tail] = hi
                tail += 1
                hi += 1
            while lo < hi and bx[j] - rx[lo] > r + e:
                lo += 1
            while head < tail and dq[head] < lo:
                head += 1
            ok = head < tail and by[j] - ry[dq[head]] <= r + e
            if pass_ == 0:
                flag[j] = ok
                amb[j] = False
            elif flag[j] and not ok:
                amb[j] = True
                flag[j] = False


@jit
def l1_bfs_kernel(U, V, oU, oV, XO, YO, s, r, target, lam, slack):
    """Hop distances under L1 via a side-r/2 grid on rotated coordinates.

    ``XO``/``YO`` are the original coordinates used to settle blues that the
    rotated comparison cannot decide under rounding.
    """
    n = U.size
    side = r / 2.0
    reach = 2 if slack == 0.0 else 3
    cell, ckey, cptr, cpu, cpv, nrows, ncols, table = grid_cells(U, V, oU, oV, s, r + slack, side, True)
    m = ckey.size
    level = np.full(n, -1, np.int64)
    level[s] = 0
    ucount = np.empty(m, np.int64)
    for c in range(m):
        ucount[c] = cptr[c + 1] - cptr[c]
    ucount[cell[s]] -= 1
    front = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    front[0] = s
    fsize = 1
    stamp = np.full(m, -1, np.int64)
    fcells = np.empty(m, np.int64)
    rx = np.empty(n, np.float64)
    ry = np.empty(n, np.float64)
    rid = np.empty(n, np.int64)
    bx = np.empty(n, np.float64)
    by = np.empty(n, np.float64)
    bid = np.empty(n, np.int64)
    flag = np.empty(n, np.bool_)
    amb = np.empty(n, np.bool_)
    i = 0
    while fsize > 0:
        i += 1
        if lam >= 0 and i > lam:
            break
        nf = 0
        nc = 0
        for k in range(fsize):
            c = cell[front[k]]
            if stamp[c] != i:
                stamp[c] = i
                fcells[nc] = c
                nc += 1
        for k in range(nc):
            c = fcells[k]
            for t in range(cptr[c], cptr[c + 1]):
                q = cpu[t]
                if level[q] == -1:
                    level[q] = i
                    ucount[c] -= 1
                    nxt[nf] = q
                    nf += 1
        for k in range(nc):
            c = fcells[k]
            rr = ckey[c] // ncols
            cc = ckey[c] % ncols
            for dr in range(-reach, reach + 1):
                for dc in range(-reach, reach + 1):
                    if dr == 0 and dc == 0:
                        continue
                    c2 = find_cell(rr + dr, cc + dc, nrows, ncols, ckey, table)
                    if c2 < 0 or ucount[c2] == 0:
                        continue
                    o = orientation(dr, dc)
                    lst = cpu if o < 2 else cpv
                    nr = 0
                    for t in range(cptr[c], cptr[c + 1]):
                        p = lst[t]
                        if level[p] == i - 1:
                            a, b = canon(U, V, p, o)
                            rx[nr] = a
                            ry[nr] = b
                            rid[nr] = p
                            nr += 1
                    nb = 0
                    for t in range(cptr[c2], cptr[c2 + 1]):
                        p = lst[t]
                        if level[p] == -1:
                            a, b = canon(U, V, p, o)
                            bx[nb] = a
                            by[nb] = b
                            bid[nb] = p
                            nb += 1
                    if nr == 0 or nb == 0:
                        continue
                    _window_hits(rx, ry, nr, bx, by, nb, r, slack, flag, amb)
                    for j in range(nb):
                        hit = flag[j]
                        if amb[j]:
                            q = bid[j]
                            for a in range(nr):
                                p = rid[a]
                                if abs(XO[p] - XO[q]) + abs(YO[p] - YO[q]) <= r:
                                    hit = True
                                    break
                        if hit:
                            q = bid[j]
                            level[q] = i
                            ucount[c2] -= 1
                            nxt[nf] = q
                            nf += 1
        tmp = front
        front = nxt
        nxt = tmp
        fsize = nf
        if target >= 0 and level[target] >= 0:
            break
    return level


@jit
def l1_dijkstra_kernel(U, V, oU, oV, XO, YO, s, r, target, slack):
    """Weighted L1 distances; neighbours searched in the surrounding cells."""
    n = U.size
    side = r / 2.0
    reach = 2 if slack == 0.0 else 3
    cell, ckey, cptr, cpu, cpv, nrows, ncols, table = grid_cells(U, V, oU, oV, s, r + slack, side, True)
    dist = np.full(n, np.inf)
    dist[s] = 0.0
    done = np.zeros(n, np.bool_)
    hk = np.empty(max(16, n), np.float64)
    hi = np.empty(max(16, n), np.int64)
    hk, hi, hs = _heap_push(hk, hi, 0, 0.0, s)
    while hs > 0:
        dp, p, hs = _heap_pop(hk, hi, hs)
        if done[p] or dp != dist[p]:
            continue
        done[p] = True
        if p == target:
            break
        c = cell[p]
        rr = ckey[c] // ncols
        cc = ckey[c] % ncols
        for dr in range(-reach, reach + 1):
            for dc in range(-reach, reach + 1):
                c2 = find_cell(rr + dr, cc + dc, nrows, ncols, ckey, table)
                if c2 < 0:
                    continue
                for t in range(cptr[c2], cptr[c2 + 1]):
                    q = cpu[t]
                    if done[q]:
                        continue
                    w = abs(XO[p] - XO[q]) + abs(YO[p] - YO[q])
                    if w <= r:
                        nd = dp + w
                        if nd < dist[q]:
                            dist[q] = nd
                            hk, hi, hs = _heap_push(hk, hi, hs, nd, q)
    return dist


# ---------------------------------------------------------------------------
# public wrappers


@dataclass(frozen=True, eq=False)
class Rotated:
    """Coordinates rotated by 45 degrees with their sort orders."""

    u: np.ndarray
    v: np.ndarray
    by_u: np.ndarray
    by_v: np.ndarray
    slack: float

    @classmethod
    def of(cls, P: PointSet) -> "Rotated":
        u = P.xs + P.ys
        v = P.xs - P.ys
        idx = np.arange(P.n)
        by_u = np.lexsort((idx, v, u)).astype(np.int64)
        by_v = np.lexsort((idx, u, v)).astype(np.int64)
        if P.integer_mode:
            slack = 0.0
        else:
            scale = float(max(np.abs(u).max(), np.abs(v).max(), 1.0)) if P.n else 1.0
            slack = 16.0 * np.finfo(np.float64).eps * scale
        return cls(u, v, by_u, by_v, slack)


def _check_source(P: PointSet, s: int) -> None:
    if not 0 <= s < P.n:
        raise IndexError(f"point index {s} out of range for {P.n} points")


def bfs_unweighted(P: PointSet, s: int, r: float) -> DistArray:
    _check_source(P, s)
    if not r > 0:
        raise ValueError("radius must be positive")
    lev = cs_bfs_kernel(P.xs, P.ys, P.by_x, P.by_y, s, float(r), -1, -1)
    vals = np.where(lev >= 0, lev.astype(np.float64), INF)
    return DistArray(vals, s)


def wx_weighted(P: PointSet, s: int, r: float) -> DistArray:
    _check_source(P, s)
    if not r > 0:
        raise ValueError("radius must be positive")
    return DistArray(wx_kernel(P.xs, P.ys, P.by_x, P.by_y, s, float(r), -1), s)


def l1_sssp(P: PointSet, s: int, r: float, weighted: bool, rot: Rotated | None = None) -> DistArray:
    _check_source(P, s)
    if not r > 0:
        raise ValueError("radius must be positive")
    rot = rot or Rotated.of(P)
    if weighted:
        d = l1_dijkstra_kernel(rot.u, rot.v, rot.by_u, rot.by_v, P.xs, P.ys, s, float(r), -1, rot.slack)
        return DistArray(d, s)
    lev = l1_bfs_kernel(rot.u, rot.v, rot.by_u, rot.by_v, P.xs, P.ys, s, float(r), -1, -1, rot.slack)
    return DistArray(np.where(lev >= 0, lev.astype(np.float64), INF), s)


def sssp(P: PointSet, s: int, r: float, m: Metric | str = Metric.L2, weighted: bool = False) -> DistArray:
    if Metric.parse(m) is Metric.L1:
        return l1_sssp(P, s, r, weighted)
    return wx_weighted(P, s, r) if weighted else bfs_unweighted(P, s, r)


def reference_sssp(P: PointSet, s: int, r: float, m: Metric | str = Metric.L2, weighted: bool = False,
                   cap: int | None = None) -> DistArray:
    """Distances on the explicitly built graph (O(n^2) time and memory)."""
    cap = oracle_cap() if cap is None else cap
    if P.n > cap:
        raise OracleCapError(f"{P.n} points exceed the reference cap of {cap}")
    _check_source(P, s)
    D = _dense_distances(P, Metric.parse(m))
    return DistArray(_reference_from_matrix(D, s, r, weighted), s)


def _dense_distances(P: PointSet, m: Metric) -> np.ndarray:
    dx = P.xs[:, None] - P.xs[None, :]
    dy = P.ys[:, None] - P.ys[None, :]
    if m is Metric.L1:
        return np.abs(dx) + np.abs(dy)
    return np.sqrt(dx * dx + dy * dy)


def _reference_from_matrix(D: np.ndarray, s: int, r: float, weighted: bool) -> np.ndarray:
    n = D.shape[0]
    A = D <= r
    dist = np.full(n, INF)
    dist[s] = 0.0
    if not weighted:
        seen = np.zeros(n, bool)
        seen[s] = True
        front = np.array([s])
        k = 0
        while front.size:
            k += 1
            nxt = A[front].any(axis=0) & ~seen
            front = np.flatnonzero(nxt)
            seen[front] = True
            dist[front] = k
        return dist
    W = np.where(A, D, INF)
    done = np.zeros(n, bool)
    for _ in range(n):
        cand = np.where(done, INF, dist)
        p = int(np.argmin(cand))
        if not math.isfinite(cand[p]):
            break
        done[p] = True
        np.minimum(dist, dist[p] + W[p], out=dist)
    return dist


def reference_oracle(P: PointSet, s: int, t: int, lam: float, m: Metric | str = Metric.L2,
                     weighted: bool = False, single_source: bool = False) -> DecisionOracle:
    """Decision oracle over the explicit graph, for cross-checking."""
    if P.n > oracle_cap():
        raise OracleCapError(f"{P.n} points exceed the reference cap of {oracle_cap()}")
    D = _dense_distances(P, Metric.parse(m))
    bound = lam if weighted else math.floor(lam)

    def pred(r: float) -> bool:
        d = _reference_from_matrix(D, s, r, weighted)
        val = d.max() if single_source else d[t]
        return bool(val <= bound * (1 + 1e-12) if weighted else val <= bound)

    return DecisionOracle(pred, name="reference")


def _within(value: float, lam: float, weighted: bool) -> bool:
    if weighted:
        # weighted sums are compared with a relative slack of a few ulps
        return value <= lam * (1 + 1e-12)
    return value <= lam


def make_oracle(P: PointSet, s: int, t: int, lam: float, m: Metric | str = Metric.L2,
                weighted: bool = False, single_source: bool = False) -> DecisionOracle:
    """Monotone predicate 'the path-length bound holds at radius r'."""
    _check_source(P, s)
    if not single_source:
        _check_source(P, t)
    m = Metric.parse(m)
    bound = float(lam) if weighted else float(math.floor(lam))
    target = -1 if single_source else int(t)
    if m is Metric.L1:
        rot = Rotated.of(P)

        def pred(r: float) -> bool:
            if weighted:
                d = l1_dijkstra_kernel(rot.u, rot.v, rot.by_u, rot.by_v, P.xs, P.ys, s, r, target, rot.slack)
                val = d.max() if single_source else d[t]
                return _within(val, bound, True)
            lim = int(bound)
            lev = l1_bfs_kernel(rot.u, rot.v, rot.by_u, rot.by_v, P.xs, P.ys, s, r, target, lim, rot.slack)
            if single_source:
                return bool(np.all(lev >= 0))
            return 0 <= lev[t] <= lim
    elif weighted:
        def pred(r: float) -> bool:
            d = wx_kernel(P.xs, P.ys, P.by_x, P.by_y, s, r, target)
            val = d.max() if single_source else d[t]
            return _within(val, bound, True)
    else:
        def pred(r: float) -> bool:
            lim = int(bound)
            lev = cs_bfs_kernel(P.xs, P.ys, P.by_x, P.by_y, s, r, target, lim)
            if single_source:
                return bool(np.all(lev >= 0))
            return 0 <= lev[t] <= lim

    zero: list[float] = []
    extent = float(max(np.ptp(P.xs), np.ptp(P.ys), 1.0)) if P.n else 1.0

    def guarded(r: float) -> bool:
        if r <= extent * 1e-9:
            # below the closest pair only coincident points are adjacent;
            # clamping also keeps the cell side away from underflow
            if not zero:
                zero.append(zero_radius(P, m))
            r = max(r, zero[0])
        return pred(r)

    return DecisionOracle(guarded, name=f"{m.value}-{'weighted' if weighted else 'hops'}")


def zero_radius(P: PointSet, m: Metric | str = Metric.L2) -> float:
    """A positive radius whose graph equals the radius-0 graph."""
    from scipy.spatial import cKDTree

    pts = np.unique(np.column_stack([P.xs, P.ys]), axis=0)
    if len(pts) < 2:
        return 1.0
    dd, _ = cKDTree(pts).query(pts, k=2, p=1 if Metric.parse(m) is Metric.L1 else 2)
    return float(dd[:, 1].min()) / 2.0


def decide(P: PointSet, s: int, t: int, lam: float, r: float, m: Metric | str = Metric.L2,
           weighted: bool = False, single_source: bool = False) -> bool:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return make_oracle(P, s, t, lam, m, weighted, single_source)(r)


# ---------------------------------------------------------------------------
# additively weighted nearest neighbour and the partition step


class AwnnIndex:
    """Insertion-only additively weighted nearest neighbour search.

    Buckets of sizes 2^k are merged on insertion (the logarithmic method);
    each bucket is searched by a vectorized scan.
    """

    def __init__(self):
        self._buckets: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def insert(self, x: float, y: float, weight: float, label: int | None = None) -> None:
        label = self._count if label is None else label
        bucket = (np.array([[x, y]], dtype=np.float64), np.array([weight], dtype=np.float64),
                  np.array([label], dtype=np.int64))
        self._count += 1
        while self._buckets and len(self._buckets[-1][1]) == len(bucket[1]):
            top = self._buckets.pop()
            bucket = tuple(np.concatenate([a, b]) for a, b in zip(top, bucket))
        self._buckets.append(bucket)

    def nearest(self, x: float, y: float) -> tuple[int, float]:
        """(label, weight + distance) of the best site; (-1, inf) if empty."""
        best_label, best = -1, INF
        for pts, wts, labels in self._buckets:
            dx = pts[:, 0] - x
            dy = pts[:, 1] - y
            vals = wts + np.sqrt(dx * dx + dy * dy)
            k = int(np.argmin(vals))
            if vals[k] < best:
                best, best_label = float(vals[k]), int(labels[k])
        return best_label, best


def partition_V(U, V, r: float, orient: int | None = None) -> list[list[int]]:
    """Group V by the first site of U (in the given order) within distance r.

    ``U`` and ``V`` are (k, 2) coordinate arrays on opposite sides of an
    axis-parallel line.  Returns lists of V positions, one per site;
    points reached by no site are left out.
    """
    from .envelope import SubInstance

    U = np.asarray(U, dtype=np.float64).reshape(-1, 2)
    V = np.asarray(V, dtype=np.float64).reshape(-1, 2)
    M = len(U)
    out: list[list[int]] = [[] for _ in range(M)]
    if M == 0 or len(V) == 0:
        return out
    o = infer_orientation(U, V) if orient is None else orient
    pts = np.vstack([U, V])
    xs, ys = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])
    stack = [(0, M, np.arange(M, M + len(V)))]
    while stack:
        a, b, vs = stack.pop()
        if vs.size == 0:
            continue
        if b - a == 1:
            if a < M - 1:
                out[a].extend((vs - M).tolist())
            else:
                inst = SubInstance.build(xs, ys, np.array([a]), vs, o)
                flags, _, _ = inst.flags_at(r)
                out[a].extend((inst.blue_ids[flags] - M).tolist())
            continue
        h = a + (b - a) // 2
        inst = SubInstance.build(xs, ys, np.arange(a, h), vs, o)
        flags, _, _ = inst.flags_at(r)
        hit = inst.blue_ids[flags]
        miss = inst.blue_ids[~flags]
        stack.append((h, b, miss))
        stack.append((a, h, hit))
    for lst in out:
        lst.sort()
    return out


def infer_orientation(U: np.ndarray, V: np.ndarray) -> int:
    """Frame code separating sites U from points V by an axis-parallel line."""
    if U[:, 1].max() < V[:, 1].min():
        return 0
    if U[:, 1].min() > V[:, 1].max():
        return 1
    if U[:, 0].max() < V[:, 0].min():
        return 2
    if U[:, 0].min() > V[:, 0].max():
        return 3
    raise ValueError("point sets are not separated by an axis-parallel line")
