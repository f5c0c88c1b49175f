"""Square grids anchored at the source point, and the search that freezes
their cell structure over a radius interval."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_geom import PointSet, RadiusInterval, emit_interval

SQRT2 = math.sqrt(2.0)

# offsets of the 5x5 patch around a cell, center excluded
PATCH = tuple((dr, dc) for dr in range(-2, 3) for dc in range(-2, 3) if (dr, dc) != (0, 0))


def cell_index(vals: np.ndarray, anchor: float, side: float) -> np.ndarray:
    """Signed cell number of each coordinate; a point on a line goes to the
    higher cell."""
    return np.floor((np.asarray(vals, dtype=np.float64) - anchor) / side).astype(np.int64)


def prune_bounds(xs: np.ndarray, sx: float, r: float) -> tuple[float, float]:
    """Coordinate range reachable from sx without crossing a gap wider than r."""
    right = np.sort(xs[xs >= sx])
    gaps = np.flatnonzero(np.diff(right) > r)
    hi = right[gaps[0]] if gaps.size else right[-1]
    left = np.sort(xs[xs <= sx])[::-1]
    gaps = np.flatnonzero(-np.diff(left) > r)
    lo = left[gaps[0]] if gaps.size else left[-1]
    return float(lo), float(hi)


@dataclass(frozen=True, eq=False)
class Grid:
    r: float
    anchor: int
    anchor_xy: tuple[float, float]
    side: float
    col_shift: int  # signed cell number of column 1
    row_shift: int
    ncols: int
    nrows: int
    live_points: np.ndarray
    cell_of: dict[int, tuple[int, int]]
    occupied: dict[tuple[int, int], np.ndarray]
    neighbors: dict[tuple[int, int], list[tuple[int, int]]] = field(repr=False)
    linf: bool = False

    @property
    def v_lines(self) -> np.ndarray:
        k = np.arange(self.col_shift, self.col_shift + self.ncols + 1)
        return self.anchor_xy[0] + k * self.side

    @property
    def h_lines(self) -> np.ndarray:
        k = np.arange(self.row_shift, self.row_shift + self.nrows + 1)
        return self.anchor_xy[1] + k * self.side

    def assignment(self, n: int | None = None) -> np.ndarray:
        """(row, col) per point as an (n, 2) array, (-1, -1) when pruned."""
        if n is None:
            n = max(self.cell_of) + 1 if self.cell_of else 0
        out = np.full((n, 2), -1, dtype=np.int64)
        for p, rc in self.cell_of.items():
            out[p] = rc
        return out

    def shape_signature(self) -> tuple:
        return (self.nrows, self.ncols, tuple(sorted(self.cell_of.items())))


def _gap_rule(gx: int, gy: int, linf: bool) -> bool:
    # whole empty cells between the two squares, in units of the side
    if linf:
        return max(gx, gy) <= 2
    return gx * gx + gy * gy <= 2


def min_cell_distance(C: tuple[int, int], C2: tuple[int, int], grid: Grid) -> float:
    """Smallest distance between the two closed squares."""
    gx = max(abs(C[1] - C2[1]) - 1, 0) * grid.side
    gy = max(abs(C[0] - C2[0]) - 1, 0) * grid.side
    if grid.linf:
        return max(gx, gy)
    return math.hypot(gx, gy)


def build_grid(P: PointSet, s: int, r: float, *, prune: bool = True, linf: bool = False,
               coords: tuple[np.ndarray, np.ndarray] | None = None) -> Grid:
    """Grid of side r/sqrt(2) with a vertical and a horizontal line through s.

    With ``linf`` the side is r/2 and distances are L-infinity, which is the
    L1 grid after rotating by 45 degrees (pass the rotated ``coords``).
    Without ``prune`` every point gets a cell, which keeps the assignment a
    function of the matrix entries alone.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    xs, ys = coords if coords is not None else (P.xs, P.ys)
    n = xs.size
    sx, sy = float(xs[s]), float(ys[s])
    side = r / 2.0 if linf else r / SQRT2
    if prune:
        x0, x1 = prune_bounds(xs, sx, r)
        y0, y1 = prune_bounds(ys, sy, r)
        live = np.flatnonzero((xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1))
    else:
        live = np.arange(n)
    cols = cell_index(xs[live], sx, side)
    rows = cell_index(ys[live], sy, side)
    col_shift, row_shift = int(cols.min()), int(rows.min())
    ncols = int(cols.max()) - col_shift + 1
    nrows = int(rows.max()) - row_shift + 1
    cols = cols - col_shift + 1
    rows = rows - row_shift + 1

    cell_of: dict[int, tuple[int, int]] = {}
    groups: dict[tuple[int, int], list[int]] = {}
    for p, rr, cc in zip(live.tolist(), rows.tolist(), cols.tolist()):
        cell_of[p] = (rr, cc)
        groups.setdefault((rr, cc), []).append(p)
    occupied = {c: np.array(v, dtype=np.int64) for c, v in groups.items()}

    reach = 3 if linf else 2
    offsets = [
        (dr, dc) for dr in range(-reach, reach + 1) for dc in range(-reach, reach + 1)
        if (dr, dc) != (0, 0) and _gap_rule(max(abs(dc) - 1, 0), max(abs(dr) - 1, 0), linf)
    ]
    neighbors = {
        c: [(c[0] + dr, c[1] + dc) for dr, dc in offsets if (c[0] + dr, c[1] + dc) in occupied]
        for c in occupied
    }
    return Grid(r, int(s), (sx, sy), side, col_shift, row_shift, ncols, nrows,
                live, cell_of, occupied, neighbors, linf)


@dataclass(frozen=True)
class SortedMatrixSpec:
    """Implicit m x 2m matrix with entry(i, j) = sqrt(2) * deltas[i] / j.

    ``deltas`` are the ascending offsets from s along one sweep direction, so
    entries grow down a column and shrink along a row.
    """

    deltas: np.ndarray

    @classmethod
    def from_offsets(cls, offsets) -> "SortedMatrixSpec":
        d = np.sort(np.abs(np.asarray(offsets, dtype=np.float64)))
        return cls(d)

    @property
    def rows(self) -> int:
        return int(self.deltas.size)

    @property
    def cols(self) -> int:
        return 2 * self.rows

    def entry(self, i: int, j: int) -> float:
        """1-based indices, as in the usual matrix notation."""
        return SQRT2 * float(self.deltas[i - 1]) / j

    def row_ranges(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Per row, the 1-based column range [jlo, jhi] of entries in (lo, hi)."""
        c = SQRT2 * self.deltas
        cols = self.cols
        with np.errstate(divide="ignore", invalid="ignore"):
            jlo = np.floor(c / hi).astype(np.int64) + 1 if math.isfinite(hi) else np.ones_like(c, np.int64)
            jlo = np.maximum(jlo, 1)
            # floor estimates may be off by one in floating point
            for _ in range(2):
                jlo = np.where((jlo > 1) & (c / np.maximum(jlo - 1, 1) < hi), jlo - 1, jlo)
                jlo = np.where(c / jlo >= hi, jlo + 1, jlo)
            if lo > 0:
                jhi = np.ceil(c / lo).astype(np.int64) - 1
                jhi = np.clip(jhi, 0, cols)
                for _ in range(2):
                    jhi = np.where((jhi < cols) & (c / (jhi + 1) > lo), jhi + 1, jhi)
                    jhi = np.where((jhi >= 1) & (c / np.maximum(jhi, 1) <= lo), jhi - 1, jhi)
            else:
                jhi = np.full(c.shape, cols, dtype=np.int64)
        jhi = np.where(c > 0, jhi, 0)
        return jlo, np.minimum(jhi, cols)

    def entries(self) -> np.ndarray:
        """Every positive entry; only for tests and tiny inputs."""
        j = np.arange(1, self.cols + 1)
        e = (SQRT2 * self.deltas[:, None]) / j[None, :]
        return e[e > 0]


def sorted_matrix_shrink(spec: SortedMatrixSpec, d, I: RadiusInterval, method: str = "fj") -> RadiusInterval:
    """Shrink I until no matrix entry lies strictly inside it.

    ``fj`` probes the weighted median of the row medians, which discards a
    constant fraction of the surviving entries per probe.  ``staircase`` is
    the plain walk used for differential testing.
    """
    if spec.rows == 0:
        return I
    if method == "staircase":
        return _staircase(spec, d, I)
    lo, hi = I.lo, I.hi
    c = SQRT2 * spec.deltas
    while True:
        jlo, jhi = spec.row_ranges(lo, hi)
        cnt = np.maximum(jhi - jlo + 1, 0)
        live = cnt > 0
        if not live.any():
            break
        mids = (jlo[live] + jhi[live]) // 2
        meds = c[live] / mids
        w = cnt[live]
        order = np.argsort(meds, kind="stable")
        cum = np.cumsum(w[order])
        k = int(np.searchsorted(cum, (cum[-1] + 1) // 2))
        probe = float(meds[order[k]])
        if not lo < probe < hi:
            break
        if d(probe):
            hi = probe
        else:
            lo = probe
    if lo == I.lo and hi == I.hi:
        return I
    return RadiusInterval(lo, hi)


def _staircase(spec: SortedMatrixSpec, d, I: RadiusInterval) -> RadiusInterval:
    lo, hi = I.lo, I.hi
    i, j = 1, 1
    m, cols = spec.rows, spec.cols
    while i <= m and j <= cols:
        e = spec.entry(i, j)
        if e <= 0:
            i += 1
            continue
        if e >= hi:
            j += 1
        elif e <= lo:
            i += 1
        elif d(e):
            hi = e
            j += 1
        else:
            lo = e
            i += 1
    if lo == I.lo and hi == I.hi:
        return I
    return RadiusInterval(lo, hi)


def sweep_specs(P: PointSet, s: int) -> list[SortedMatrixSpec]:
    """The four matrices: right and left of s on x, above and below on y."""
    sx, sy = P.xs[s], P.ys[s]
    xs, ys = P.xs, P.ys
    return [
        SortedMatrixSpec.from_offsets(xs[xs >= sx] - sx),
        SortedMatrixSpec.from_offsets(sx - xs[xs <= sx]),
        SortedMatrixSpec.from_offsets(ys[ys >= sy] - sy),
        SortedMatrixSpec.from_offsets(sy - ys[ys <= sy]),
    ]


def parametric_grid(P: PointSet, s: int, d, I: RadiusInterval, method: str = "fj") -> tuple[Grid, RadiusInterval]:
    """Shrink I until every point keeps its cell for all radii inside it,
    then build the (unpruned) grid at the midpoint."""
    for spec in sweep_specs(P, s):
        I = sorted_matrix_shrink(spec, d, I, method=method)
        emit_interval(I, "parametric_grid")
    grid = build_grid(P, s, I.midpoint(), prune=False)
    return grid, I


def grid_matrix_candidates(P: PointSet, s: int) -> np.ndarray:
    """Every entry of the four matrices; test helper for small n."""
    return np.unique(np.concatenate([spec.entries() for spec in sweep_specs(P, s)] + [np.empty(0)]))
