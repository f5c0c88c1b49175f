"""Upper envelopes of equal-radius arcs above a separating line.

Red points sit on one side of an axis-parallel line, blue points on the
other.  A blue point has a red point within distance r exactly when it lies
under the upper envelope of the radius-r circles around the reds.  Every
instance is first mapped to a canonical frame where the line is horizontal
and the reds are below it.

The parametric half of the module answers the same question for the unknown
optimal radius: it collects every radius at which the answer could change,
settles those radii with the decision oracle, and reports flags that stay
valid over the whole remaining interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from ._nb import jit
from .core_geom import ConsistencyError, RadiusInterval, emit_interval, interval_shrink

# orientation codes: where the reds are relative to the line
REDS_BELOW, REDS_ABOVE, REDS_LEFT, REDS_RIGHT = 0, 1, 2, 3

# boundary event kinds
EV_LEFT_END, EV_CROSS, EV_PREV_RIGHT_END = 0, 1, 2


def to_frame(xs, ys, orient: int):
    """Map coordinates so the line is horizontal with the reds below it."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if orient == REDS_BELOW:
        return xs, ys
    if orient == REDS_ABOVE:
        return xs, -ys
    if orient == REDS_LEFT:
        return ys, xs
    return ys, -xs


@dataclass(frozen=True)
class Separator:
    """Axis-parallel line; ``orient`` says on which side the reds are."""

    orient: int = REDS_BELOW
    value: float = 0.0

    @classmethod
    def horizontal(cls, y: float, reds_below: bool = True) -> "Separator":
        return cls(REDS_BELOW if reds_below else REDS_ABOVE, float(y))

    @classmethod
    def vertical(cls, x: float, reds_left: bool = True) -> "Separator":
        return cls(REDS_LEFT if reds_left else REDS_RIGHT, float(x))

    @property
    def level(self) -> float:
        """Height of the line in the canonical frame."""
        return self.value if self.orient in (REDS_BELOW, REDS_LEFT) else -self.value


@jit
def _arc_height(cx, cy, r2, x):
    t = r2 - (x - cx) * (x - cx)
    if t < 0.0:
        t = 0.0
    return cy + math.sqrt(t)


@jit
def env_build(rx, ry, L, r, pred, pstart, pright, skind):
    """Stack construction of the envelope; reds sorted by rx.

    Fills, per piece, the defining red, the x where the piece starts, the
    right end of the red's arc and how the piece starts (own left end, a
    circle crossing, or where the previous arc meets the line).  Returns
    the number of pieces.
    """
    n = rx.size
    r2 = r * r
    top = -1
    i = 0
    while i < n:
        best = i
        j = i
        while j + 1 < n and rx[j + 1] == rx[i]:
            j += 1
            if ry[j] > ry[best]:
                best = j
        i = j + 1
        q = best
        dl = L - ry[q]
        if dl > r:
            continue
        if dl < 0.0:
            dl = 0.0
        h = math.sqrt(r2 - dl * dl)
        ql = rx[q] - h
        qr = rx[q] + h
        start = ql
        kind = 0
        hidden = False
        while top >= 0:
            p = pred[top]
            pr = pright[top]
            if ql >= pr:
                break
            dp = L - ry[p]
            if dp < 0.0:
                dp = 0.0
            pl = rx[p] - math.sqrt(max(r2 - dp * dp, 0.0))
            ol = max(ql, pl)
            orr = min(qr, pr)
            dx = rx[q] - rx[p]
            dy = ry[q] - ry[p]
            dd2 = dx * dx + dy * dy
            xc = math.nan
            if dd2 > 0.0 and dd2 <= 4.0 * r2:
                dd = math.sqrt(dd2)
                hh = math.sqrt(max(r2 - 0.25 * dd2, 0.0))
                xcand = 0.5 * (rx[p] + rx[q]) - hh * dy / dd
                ycand = 0.5 * (ry[p] + ry[q]) + hh * dx / dd
                if ycand >= L and xcand > ol and xcand < orr:
                    xc = xcand
            xstar = math.nan
            k = 0
            if xc == xc:
                xm = 0.5 * (xc + orr)
                if _arc_height(rx[q], ry[q], r2, xm) >= _arc_height(rx[p], ry[p], r2, xm):
                    xstar = xc
                    k = 1
            else:
                xm = 0.5 * (ol + orr)
                if _arc_height(rx[q], ry[q], r2, xm) >= _arc_height(rx[p], ry[p], r2, xm):
                    xstar = ol
                    k = 0
            if xstar != xstar:
                # the earlier arc wins the whole overlap
                if qr <= pr:
                    hidden = True
                    break
                xstar = pr
                k = 2
            if xstar <= pstart[top]:
                top -= 1
                continue
            start = xstar
            kind = k
            break
        if hidden:
            continue
        top += 1
        pred[top] = q
        pstart[top] = start
        pright[top] = qr
        skind[top] = kind
    return top + 1


@jit
def piece_ends(pstart, pright, npieces, pend):
    for t in range(npieces):
        e = pright[t]
        if t + 1 < npieces and pstart[t + 1] < e:
            e = pstart[t + 1]
        pend[t] = e


@jit
def env_query(rx, ry, pred, pstart, pend, npieces, bx, by, r, span, flag):
    """Merge x-sorted blues against the pieces.

    span[j] is the piece over blue j (-1 in a gap); flag[j] tells whether a
    red is within r.  Reds of the neighbouring pieces are checked as well so
    a blue sitting on a breakpoint is not lost to rounding.
    """
    t = 0
    for j in range(bx.size):
        x = bx[j]
        while t + 1 < npieces and pstart[t + 1] <= x:
            t += 1
        s = -1
        if npieces > 0 and x >= pstart[t] and x <= pend[t]:
            s = t
        span[j] = s
        f = False
        lo = t - 1 if t > 0 else 0
        hi = t + 2 if t + 2 < npieces else npieces
        for u in range(lo, hi):
            p = pred[u]
            dx = x - rx[p]
            dy = by[j] - ry[p]
            if math.sqrt(dx * dx + dy * dy) <= r:
                f = True
                break
        flag[j] = f


@jit
def env_flags(rx, ry, L, r, bx, by):
    """Envelope build plus merge in one call; blues sorted by bx."""
    n = rx.size
    pred = np.empty(n, np.int64)
    pstart = np.empty(n, np.float64)
    pright = np.empty(n, np.float64)
    skind = np.empty(n, np.int64)
    k = env_build(rx, ry, L, r, pred, pstart, pright, skind)
    pend = np.empty(max(k, 1), np.float64)
    piece_ends(pstart, pright, k, pend)
    span = np.empty(bx.size, np.int64)
    flag = np.empty(bx.size, np.bool_)
    env_query(rx, ry, pred, pstart, pend, k, bx, by, r, span, flag)
    return flag, span, pred[:k].copy()


@dataclass(frozen=True, eq=False)
class ArcEnvelope:
    """Upper envelope at radius r.

    Coordinates of ``x_start``/``x_end`` and ``vertices`` are given in the
    canonical frame of ``line``; for a horizontal line with reds below that
    is the original frame.
    """

    r: float
    line: Separator
    red_index: np.ndarray  # per piece, position in the reds argument
    x_start: np.ndarray
    x_end: np.ndarray
    start_kind: np.ndarray
    reds_xy: np.ndarray  # canonical coordinates of the reds argument

    @property
    def arcs(self) -> list[tuple[int, tuple[float, float]]]:
        return [(int(i), (float(a), float(b))) for i, a, b in zip(self.red_index, self.x_start, self.x_end)]

    @property
    def vertices(self) -> list[tuple[float, float]]:
        out = []
        r2 = self.r * self.r
        for t in range(1, len(self.red_index)):
            if self.x_start[t] < self.x_end[t - 1] or self.start_kind[t] != EV_LEFT_END:
                x = float(self.x_start[t])
                cx, cy = self.reds_xy[self.red_index[t]]
                out.append((x, float(_arc_height(cx, cy, r2, x))))
        return out

    def height(self, x: float) -> float:
        """Envelope height at x, or -inf where no arc is present."""
        r2 = self.r * self.r
        for i, a, b in zip(self.red_index, self.x_start, self.x_end):
            if a <= x <= b:
                cx, cy = self.reds_xy[i]
                return float(_arc_height(cx, cy, r2, x))
        return -math.inf


def _canonical(points, line: Separator) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return to_frame(pts[:, 0], pts[:, 1], line.orient)


def build_envelope(reds, r: float, line: Separator | float = 0.0) -> ArcEnvelope:
    """Envelope of the radius-r arcs of ``reds`` that reach the line."""
    if not isinstance(line, Separator):
        line = Separator.horizontal(float(line))
    X, Y = _canonical(reds, line)
    order = np.lexsort((Y, X))
    rx, ry = np.ascontiguousarray(X[order]), np.ascontiguousarray(Y[order])
    n = rx.size
    pred = np.empty(n, np.int64)
    pstart = np.empty(n, np.float64)
    pright = np.empty(n, np.float64)
    skind = np.empty(n, np.int64)
    k = env_build(rx, ry, line.level, float(r), pred, pstart, pright, skind) if n else 0
    pend = np.empty(max(k, 1), np.float64)
    piece_ends(pstart, pright, k, pend)
    return ArcEnvelope(float(r), line, order[pred[:k]], pstart[:k].copy(), pend[:k].copy(),
                       skind[:k].copy(), np.column_stack([X, Y]))


def below_envelope(env: ArcEnvelope, blues) -> list[bool]:
    """Per blue (input order): is some red within distance r."""
    X, Y = _canonical(blues, env.line)
    if X.size == 0:
        return []
    if len(env.red_index) == 0:
        return [False] * int(X.size)
    order = np.argsort(X, kind="stable")
    bx, by = np.ascontiguousarray(X[order]), np.ascontiguousarray(Y[order])
    # pieces refer to reds through red_index; hand the kernel a compact copy
    rx = np.ascontiguousarray(env.reds_xy[env.red_index, 0])
    ry = np.ascontiguousarray(env.reds_xy[env.red_index, 1])
    k = len(env.red_index)
    span = np.empty(bx.size, np.int64)
    flag = np.empty(bx.size, np.bool_)
    env_query(rx, ry, np.arange(k, dtype=np.int64), np.ascontiguousarray(env.x_start),
              np.ascontiguousarray(env.x_end), k, bx, by, env.r, span, flag)
    out = np.empty(bx.size, np.bool_)
    out[order] = flag
    return out.tolist()


# ---------------------------------------------------------------------------
# critical radii of the envelope structure


@jit
def _voronoi_radii_brute(px, py):
    """Circumradii of triples whose circumcircle has no point strictly inside."""
    n = px.size
    out = np.empty(n * n * n, np.float64)
    k = 0
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                ax, ay = px[a], py[a]
                bx, by = px[b] - ax, py[b] - ay
                cx, cy = px[c] - ax, py[c] - ay
                den = 2.0 * (bx * cy - by * cx)
                if den == 0.0:
                    continue
                b2 = bx * bx + by * by
                c2 = cx * cx + cy * cy
                ux = (cy * b2 - by * c2) / den
                uy = (bx * c2 - cx * b2) / den
                rad = math.sqrt(ux * ux + uy * uy)
                ok = True
                for e in range(n):
                    if e == a or e == b or e == c:
                        continue
                    ex = px[e] - ax - ux
                    ey = py[e] - ay - uy
                    if math.sqrt(ex * ex + ey * ey) < rad * (1.0 - 1e-12):
                        ok = False
                        break
                if ok:
                    out[k] = rad
                    k += 1
    return out[:k].copy()


def voronoi_radii_brute(reds) -> np.ndarray:
    pts = np.unique(np.asarray(reds, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return np.empty(0)
    return np.unique(_voronoi_radii_brute(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])))


def _circumradii(pts: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    a = pts[simplices[:, 0]]
    b = pts[simplices[:, 1]] - a
    c = pts[simplices[:, 2]] - a
    den = 2.0 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    keep = den != 0
    b, c, den = b[keep], c[keep], den[keep]
    b2 = (b * b).sum(1)
    c2 = (c * c).sum(1)
    ux = (c[:, 1] * b2 - b[:, 1] * c2) / den
    uy = (b[:, 0] * c2 - c[:, 0] * b2) / den
    return np.sqrt(ux * ux + uy * uy)


def envelope_critical_values(reds) -> np.ndarray:
    """Distance from each Voronoi vertex of the reds to its nearest red."""
    pts = np.unique(np.asarray(reds, dtype=np.float64).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return np.empty(0)
    if len(pts) <= 12:
        return np.unique(_voronoi_radii_brute(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])))
    from scipy.spatial import Delaunay, QhullError

    try:
        tri = Delaunay(pts)
    except QhullError:
        return np.empty(0)  # all collinear
    return np.unique(_circumradii(pts, tri.simplices))


@jit
def line_event_radii(rx, ry, L):
    """Radii at which the trace of the disks on the line changes shape.

    Returns each red's distance to the line followed by the radii at the
    breakpoints of the nearest-red partition of the line.
    """
    n = rx.size
    out = np.empty(2 * n + 1, np.float64)
    k = 0
    # lower envelope of (x - rx)^2 + d^2 over the reds, rx ascending
    hx = np.empty(n, np.float64)
    hc = np.empty(n, np.float64)
    z = np.empty(n + 1, np.float64)
    m = -1
    for i in range(n):
        d = L - ry[i]
        if d < 0.0:
            d = 0.0
        out[k] = d
        k += 1
        c = rx[i] * rx[i] + d * d
        if m >= 0 and hx[m] == rx[i]:
            if c >= hc[m]:
                continue
            m -= 1
        while m >= 0:
            s = (c - hc[m]) / (2.0 * (rx[i] - hx[m]))
            if s <= z[m]:
                m -= 1
            else:
                break
        m += 1
        hx[m] = rx[i]
        hc[m] = c
        if m == 0:
            z[m] = -math.inf
        else:
            z[m] = (c - hc[m - 1]) / (2.0 * (rx[i] - hx[m - 1]))
    for t in range(1, m + 1):
        x = z[t]
        d2 = hc[t] - hx[t] * hx[t]
        v = (x - hx[t]) * (x - hx[t]) + (d2 if d2 > 0.0 else 0.0)
        out[k] = math.sqrt(v)
        k += 1
    return out[:k].copy()


# ---------------------------------------------------------------------------
# moving keys and parametric sorting


@dataclass(frozen=True)
class ComparisonRoot:
    value: float
    kind: str  # "vertex-vertex" or "vertex-bluepoint"


def key_at(c, k, a, r):
    """x(r) = c + k*sqrt(r^2 - a^2); blue points have k = 0."""
    t = r * r - np.asarray(a) ** 2
    return np.asarray(c) + np.asarray(k) * np.sqrt(np.maximum(t, 0.0))


def key_roots(c1, k1, a1, c2, k2, a2):
    """All radii where two moving keys coincide, as a (m, 2) array with NaN
    where a root does not exist."""
    c1, k1, a1, c2, k2, a2 = (np.asarray(v, dtype=np.float64) for v in (c1, k1, a1, c2, k2, a2))
    # make the first key the moving one when only one moves
    sw = (k1 == 0) & (k2 != 0)
    c1, c2 = np.where(sw, c2, c1), np.where(sw, c1, c2)
    k1, k2 = np.where(sw, k2, k1), np.where(sw, k1, k2)
    a1, a2 = np.where(sw, a2, a1), np.where(sw, a1, a2)
    D = c2 - c1
    m = c1.size
    t = np.full((m, 2), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        one = (k1 != 0) & (k2 == 0)
        s1 = D / k1
        t[:, 0] = np.where(one & (s1 >= 0), a1 * a1 + s1 * s1, np.nan)
        two = (k1 != 0) & (k2 != 0)
        A1, A2 = a1 * a1, a2 * a2
        al = k1 * k1 + k2 * k2
        be = -k1 * k1 * A1 - k2 * k2 * A2 - D * D
        ga = 4.0 * k1 * k1 * k2 * k2
        qa = (k1 * k1 - k2 * k2) ** 2
        qb = 2.0 * al * be + ga * (A1 + A2)
        qc = be * be - ga * A1 * A2
        disc = qb * qb - 4.0 * qa * qc
        scale = np.maximum(np.abs(qb * qb), np.abs(4.0 * qa * qc)) + 1e-300
        disc = np.where((disc < 0) & (disc > -1e-10 * scale), 0.0, disc)
        sq = np.sqrt(disc)
        quad = two & (np.abs(qa) > 1e-14 * (al * al))
        lin = two & ~quad & (qb != 0)
        r_a = np.where(quad, (-qb - sq) / (2.0 * qa), np.where(lin, -qc / qb, np.nan))
        r_b = np.where(quad, (-qb + sq) / (2.0 * qa), np.nan)
        t[:, 0] = np.where(two, r_a, t[:, 0])
        t[:, 1] = np.where(two, r_b, np.nan)
        # drop roots outside the domain or introduced by squaring
        floor = np.maximum(A1, A2)[:, None]
        t = np.where(t >= floor * (1 - 1e-12), t, np.nan)
        tt = np.maximum(t, floor)
        S1 = np.sqrt(np.maximum(tt - A1[:, None], 0.0))
        S2 = np.sqrt(np.maximum(tt - A2[:, None], 0.0))
        res = (c1[:, None] + k1[:, None] * S1) - (c2[:, None] + k2[:, None] * S2)
        mag = np.abs(c1)[:, None] + np.abs(c2)[:, None] + np.abs(k1)[:, None] * S1 + np.abs(k2)[:, None] * S2 + 1e-300
        t = np.where(np.abs(res) <= 1e-7 * mag, t, np.nan)
    return np.sqrt(t)


@lru_cache(maxsize=None)
def batcher_stages(N: int) -> tuple[np.ndarray, ...]:
    """Comparator stages of the odd-even merge sort network on N = 2^k wires."""
    stages = []
    p = 1
    while p < N:
        k = p
        while k >= 1:
            pairs = []
            for j in range(k % p, N - k, 2 * k):
                for i in range(min(k, N - j - k)):
                    if (i + j) // (2 * p) == (i + j + k) // (2 * p):
                        pairs.append((i + j, i + j + k))
            stages.append(np.array(pairs, dtype=np.int64).reshape(-1, 2))
            k //= 2
        p *= 2
    return tuple(stages)


def _pow2(m: int) -> int:
    return 1 << max(0, (m - 1).bit_length())


def batched_parametric_sort(keys: Sequence, roots: Callable[[int, int], Sequence[ComparisonRoot]], d, I: RadiusInterval):
    """Sort keys whose values depend on r, as they are ordered at r*.

    ``keys[i]`` is either a callable r -> value or an object with a ``key``
    method.  The network runs stage by stage: the roots of a stage's
    comparisons that fall inside the interval are settled by one batched
    shrink, then every comparison is decided at the new midpoint.
    """
    fns = [k if callable(k) else k.key for k in keys]
    n = len(fns)
    if n == 0:
        return [], I
    N = _pow2(n)
    wires = list(range(n)) + [-1] * (N - n)
    for stage in batcher_stages(N):
        vals = []
        for i, j in stage:
            a, b = wires[i], wires[j]
            if a >= 0 and b >= 0:
                vals.extend(rt.value for rt in roots(a, b) if I.interior(rt.value))
        if vals:
            I = interval_shrink(I, vals, d)
            emit_interval(I, "batched_parametric_sort")
        mid = I.midpoint()
        for i, j in stage:
            a, b = wires[i], wires[j]
            if a < 0:
                if b >= 0:
                    wires[i], wires[j] = b, a
                continue
            if b < 0:
                continue
            va, vb = fns[a](mid), fns[b](mid)
            if va > vb or (va == vb and a > b):
                wires[i], wires[j] = b, a
    perm = [w for w in wires if w >= 0]
    mid = I.midpoint()
    for a, b in zip(perm, perm[1:]):
        if fns[a](mid) > fns[b](mid):
            raise ConsistencyError("comparison left unresolved by the network")
    return perm, I


def arc_membership_critical_values(assignments) -> np.ndarray:
    """Distance of each blue to the red whose arc is above it."""
    if len(assignments) == 0:
        return np.empty(0)
    arr = np.asarray(assignments, dtype=np.float64).reshape(-1, 4)
    dx = arr[:, 0] - arr[:, 2]
    dy = arr[:, 1] - arr[:, 3]
    return np.sqrt(dx * dx + dy * dy)


# ---------------------------------------------------------------------------
# batched parametric Subproblem solving


@dataclass(eq=False)
class SubInstance:
    """One red/blue instance in the canonical frame.

    ``red_ids``/``blue_ids`` are caller labels (point indices); coordinates
    are canonical and sorted by x.  The line sits halfway between the
    highest red and the lowest blue, so it does not depend on r.
    """

    rx: np.ndarray
    ry: np.ndarray
    red_ids: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    blue_ids: np.ndarray
    L: float
    red_key: object = None
    _voronoi: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def build(cls, xs, ys, reds, blues, orient: int, red_key=None) -> "SubInstance":
        reds = np.asarray(reds, dtype=np.int64)
        blues = np.asarray(blues, dtype=np.int64)
        RX, RY = to_frame(xs[reds], ys[reds], orient)
        BX, BY = to_frame(xs[blues], ys[blues], orient)
        ro = np.lexsort((RY, RX))
        bo = np.argsort(BX, kind="stable")
        if RY.size and BY.size:
            L = 0.5 * (float(RY.max()) + float(BY.min()))
        elif RY.size:
            L = float(RY.max())
        else:
            L = float(BY.min()) if BY.size else 0.0
        return cls(np.ascontiguousarray(RX[ro]), np.ascontiguousarray(RY[ro]), reds[ro],
                   np.ascontiguousarray(BX[bo]), np.ascontiguousarray(BY[bo]), blues[bo], L, red_key)

    @classmethod
    def from_points(cls, reds, blues, line: Separator | None = None) -> "SubInstance":
        reds = np.asarray(reds, dtype=np.float64).reshape(-1, 2)
        blues = np.asarray(blues, dtype=np.float64).reshape(-1, 2)
        pts = np.vstack([reds, blues])
        orient = line.orient if line is not None else REDS_BELOW
        nr = len(reds)
        return cls.build(pts[:, 0], pts[:, 1], np.arange(nr), np.arange(nr, len(pts)), orient)

    def flags_at(self, r: float):
        """(flags, span pieces, piece reds) at radius r, blues in sorted order."""
        if self.rx.size == 0:
            return np.zeros(self.bx.size, np.bool_), np.full(self.bx.size, -1, np.int64), np.empty(0, np.int64)
        return env_flags(self.rx, self.ry, self.L, r, self.bx, self.by)

    def structure_at(self, r: float):
        n = self.rx.size
        pred = np.empty(n, np.int64)
        pstart = np.empty(n, np.float64)
        pright = np.empty(n, np.float64)
        skind = np.empty(n, np.int64)
        k = env_build(self.rx, self.ry, self.L, r, pred, pstart, pright, skind) if n else 0
        return pred[:k], pstart[:k], pright[:k], skind[:k]

    def voronoi(self) -> np.ndarray:
        if self._voronoi is None:
            self._voronoi = envelope_critical_values(np.column_stack([self.rx, self.ry]))
        return self._voronoi


def structure_events(inst: SubInstance, r: float):
    """Moving keys (c, k, a) of the envelope boundaries at radius r.

    Returns key arrays plus, per key, the piece it opens (>= 0) or closes
    (encoded as -1 - piece).
    """
    pred, pstart, pright, skind = inst.structure_at(r)
    rx, ry, L = inst.rx, inst.ry, inst.L
    cs, ks, as_, tags = [], [], [], []
    k = len(pred)
    for t in range(k):
        q = pred[t]
        dq = max(L - ry[q], 0.0)
        if skind[t] == EV_CROSS and t > 0:
            p = pred[t - 1]
            dx, dy = rx[q] - rx[p], ry[q] - ry[p]
            dd = math.sqrt(dx * dx + dy * dy)
            cs.append(0.5 * (rx[p] + rx[q]))
            ks.append(-dy / dd)
            as_.append(0.5 * dd)
        elif skind[t] == EV_PREV_RIGHT_END and t > 0:
            p = pred[t - 1]
            cs.append(rx[p])
            ks.append(1.0)
            as_.append(max(L - ry[p], 0.0))
        else:
            cs.append(rx[q])
            ks.append(-1.0)
            as_.append(dq)
        tags.append(t)
        if t + 1 == k or pstart[t + 1] >= pright[t] and skind[t + 1] == EV_LEFT_END:
            cs.append(rx[q])
            ks.append(1.0)
            as_.append(dq)
            tags.append(-1 - t)
    return (np.array(cs, dtype=np.float64), np.array(ks, dtype=np.float64),
            np.array(as_, dtype=np.float64), np.array(tags, dtype=np.int64))


def _sweep_hits(c, k, a, bx, lo, hi) -> bool:
    """Could some boundary key pass over some blue for r in [lo, hi]?"""
    if c.size == 0 or bx.size == 0:
        return False
    if not math.isfinite(hi):
        return True
    lo_eff = np.maximum(lo, a)
    x0 = key_at(c, k, a, lo_eff)
    x1 = key_at(c, k, a, hi)
    left = np.minimum(x0, x1)
    right = np.maximum(x0, x1)
    i0 = np.searchsorted(bx, left, side="left")
    i1 = np.searchsorted(bx, right, side="right")
    return bool(np.any(i1 > i0))


def _network_sort_many(groups, d, I: RadiusInterval):
    """Parametric sort of several independent key lists in lock step.

    ``groups`` holds (c, k, a, is_blue) arrays; keys of one group are sorted
    among themselves.  Returns the permutations and the shrunk interval.
    """
    if not groups:
        return [], I
    sizes = [g[0].size for g in groups]
    Ns = [_pow2(m) for m in sizes]
    offs = np.concatenate([[0], np.cumsum(Ns)]).astype(np.int64)
    c = np.full(offs[-1], np.inf)
    k = np.zeros(offs[-1])
    a = np.zeros(offs[-1])
    blue = np.zeros(offs[-1], np.bool_)
    wires = np.full(offs[-1], -1, np.int64)
    for gi, (gc, gk, ga, gb) in enumerate(groups):
        o, m = offs[gi], sizes[gi]
        c[o:o + m], k[o:o + m], a[o:o + m], blue[o:o + m] = gc, gk, ga, gb
        wires[o:o + m] = np.arange(o, o + m)
    tie = np.arange(offs[-1])
    # comparator lists grouped by network size
    by_N: dict[int, list[int]] = {}
    for gi, N in enumerate(Ns):
        by_N.setdefault(N, []).append(gi)
    plans = []
    for N, gis in by_N.items():
        plans.append((batcher_stages(N), offs[np.array(gis)]))
    nstages = max(len(p[0]) for p in plans)
    for st in range(nstages):
        pi_list, pj_list = [], []
        for stages, base in plans:
            if st < len(stages) and stages[st].size:
                pairs = stages[st]
                pi_list.append((base[:, None] + pairs[None, :, 0]).ravel())
                pj_list.append((base[:, None] + pairs[None, :, 1]).ravel())
        if not pi_list:
            continue
        pi = np.concatenate(pi_list)
        pj = np.concatenate(pj_list)
        wa, wb = wires[pi], wires[pj]
        real = (wa >= 0) & (wb >= 0)
        ra, rb = wa[real], wb[real]
        # only boundary/blue comparisons can change inside the interval
        mov = (k[ra] != 0) | (k[rb] != 0)
        mixed = mov & (blue[ra] != blue[rb])
        if mixed.any():
            ia, ib = ra[mixed], rb[mixed]
            rts = key_roots(c[ia], k[ia], a[ia], c[ib], k[ib], a[ib]).ravel()
            rts = rts[np.isfinite(rts)]
            rts = rts[(rts > I.lo) & (rts < I.hi)]
            if rts.size:
                I = interval_shrink(I, rts, d)
                emit_interval(I, "batched_parametric_sort")
        mid = I.midpoint()
        va = np.where(wa >= 0, key_at(c[np.maximum(wa, 0)], k[np.maximum(wa, 0)], a[np.maximum(wa, 0)], mid), np.inf)
        vb = np.where(wb >= 0, key_at(c[np.maximum(wb, 0)], k[np.maximum(wb, 0)], a[np.maximum(wb, 0)], mid), np.inf)
        ta = np.where(wa >= 0, tie[np.maximum(wa, 0)], np.iinfo(np.int64).max)
        tb = np.where(wb >= 0, tie[np.maximum(wb, 0)], np.iinfo(np.int64).max)
        swap = (va > vb) | ((va == vb) & (ta > tb))
        wires[pi[swap]], wires[pj[swap]] = wb[swap], wa[swap]
    perms = []
    for gi in range(len(groups)):
        o, m = offs[gi], sizes[gi]
        w = wires[o:o + Ns[gi]]
        perms.append(w[w >= 0][:m] - o)
    return perms, I


def solve_batch(instances: Sequence[SubInstance], d, I: RadiusInterval, source: str = "solve_subproblem_parametric"):
    """Flags of every instance at r*, with the interval they are valid on.

    Three batched rounds: radii where some envelope changes shape, radii
    where a boundary passes a blue, radii where a blue leaves its arc.
    """
    live = [inst for inst in instances if inst.rx.size and inst.bx.size]
    if live:
        # round 1: envelope shape
        vals = []
        seen: dict[object, np.ndarray] = {}
        for inst in live:
            if inst.red_key is not None:
                v = seen.get(inst.red_key)
                if v is None:
                    v = seen[inst.red_key] = inst.voronoi()
            else:
                v = inst.voronoi()
            vals.append(v)
            vals.append(line_event_radii(inst.rx, inst.ry, inst.L))
        I = interval_shrink(I, np.concatenate(vals), d)
        emit_interval(I, source)

        # round 2: order of boundaries and blues
        mid = I.midpoint()
        groups, owners = [], []
        for inst in live:
            c, k, a, _ = structure_events(inst, mid)
            if _sweep_hits(c, k, a, inst.bx, I.lo, I.hi):
                nb = inst.bx.size
                groups.append((np.concatenate([c, inst.bx]), np.concatenate([k, np.zeros(nb)]),
                               np.concatenate([a, np.zeros(nb)]),
                               np.concatenate([np.zeros(c.size, np.bool_), np.ones(nb, np.bool_)])))
                owners.append(inst)
        if groups:
            _, I = _network_sort_many(groups, d, I)
            emit_interval(I, source)

        # round 3: blue against its spanning arc
        mid = I.midpoint()
        vals = []
        for inst in live:
            _, span, pieces = inst.flags_at(mid)
            has = span >= 0
            if has.any():
                red = pieces[span[has]]
                dx = inst.bx[has] - inst.rx[red]
                dy = inst.by[has] - inst.ry[red]
                vals.append(np.sqrt(dx * dx + dy * dy))
        if vals:
            I = interval_shrink(I, np.concatenate(vals), d)
            emit_interval(I, source)

    mid = I.midpoint()
    out = []
    for inst in instances:
        flags, _, _ = inst.flags_at(mid)
        out.append(flags)
    return out, I


def solve_subproblem_parametric(reds, blues, line: Separator | None, d, I: RadiusInterval):
    """Flags (blue input order) valid on the whole returned interval."""
    inst = SubInstance.from_points(reds, blues, line)
    flags, I = solve_batch([inst], d, I)
    out = np.empty(inst.bx.size, np.bool_)
    out[inst.blue_ids - len(np.asarray(reds).reshape(-1, 2))] = flags[0]
    return out.tolist(), I
