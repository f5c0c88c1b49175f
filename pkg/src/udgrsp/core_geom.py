"""Points, metrics, radius intervals and the candidate-search engine.

Every parametric solver in the package keeps a half-open interval (lo, hi]
that is known to contain the optimal radius and narrows it by asking a
monotone decision oracle about candidate radii.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from . import _scan

REL_TOL = 1e-12
# integer coordinates beyond this are not treated as exact
_INT_LIMIT = 2.0**50


class GeometryError(Exception):
    """Base class for solver errors."""


class EmptyInputError(GeometryError, ValueError):
    pass


class ConsistencyError(GeometryError, RuntimeError):
    """Raised when internal results disagree; always indicates a bug."""


class InfeasibleError(GeometryError):
    """No radius satisfies the path-length bound."""


class OracleCapError(GeometryError, ValueError):
    """An O(n^2) reference routine was asked to handle too many points."""


class Metric(str, Enum):
    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, value: "Metric | str") -> "Metric":
        if isinstance(value, Metric):
            return value
        return cls(str(value).lower())

    @property
    def code(self) -> int:
        return 1 if self is Metric.L1 else 2


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PointSet:
    """Immutable planar point set with both coordinate orders precomputed."""

    xs: np.ndarray
    ys: np.ndarray
    by_x: np.ndarray
    by_y: np.ndarray
    integer_mode: bool

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]] | np.ndarray) -> "PointSet":
        arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("points must be (x, y) pairs")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        return cls.from_arrays(arr[:, 0], arr[:, 1])

    @classmethod
    def from_arrays(cls, xs, ys) -> "PointSet":
        xs = np.ascontiguousarray(xs, dtype=np.float64).copy()
        ys = np.ascontiguousarray(ys, dtype=np.float64).copy()
        if xs.shape != ys.shape or xs.ndim != 1:
            raise ValueError("xs and ys must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ValueError("coordinates must be finite")
        idx = np.arange(xs.size)
        by_x = np.lexsort((idx, ys, xs)).astype(np.int64)
        by_y = np.lexsort((idx, xs, ys)).astype(np.int64)
        integer = bool(
            np.all(xs == np.round(xs)) and np.all(ys == np.round(ys))
            and (xs.size == 0 or max(np.abs(xs).max(), np.abs(ys).max()) <= _INT_LIMIT)
        )
        return cls(_readonly(xs), _readonly(ys), _readonly(by_x), _readonly(by_y), integer)

    @property
    def n(self) -> int:
        return int(self.xs.size)

    def __len__(self) -> int:
        return self.n

    @property
    def points(self) -> tuple[tuple[float, float], ...]:
        if self.integer_mode:
            return tuple((int(x), int(y)) for x, y in zip(self.xs, self.ys))
        return tuple((float(x), float(y)) for x, y in zip(self.xs, self.ys))

    def point(self, i: int) -> tuple[float, float]:
        return float(self.xs[i]), float(self.ys[i])

    def subset(self, idx) -> "PointSet":
        idx = np.asarray(idx, dtype=np.int64)
        return PointSet.from_arrays(self.xs[idx], self.ys[idx])


def dist(p, q, m: Metric | str = Metric.L2):
    m = Metric.parse(m)
    dx = float(p[0]) - float(q[0])
    dy = float(p[1]) - float(q[1])
    if m is Metric.L1:
        d = abs(dx) + abs(dy)
        if all(float(c).is_integer() for c in (*p, *q)):
            return int(d)
        return d
    return math.sqrt(dx * dx + dy * dy)


def point_dist(P: PointSet, i: int, j: int, m: Metric | str = Metric.L2) -> float:
    dx = P.xs[i] - P.xs[j]
    dy = P.ys[i] - P.ys[j]
    if Metric.parse(m) is Metric.L1:
        return float(abs(dx) + abs(dy))
    return float(math.sqrt(dx * dx + dy * dy))


def pairwise_distances(P: PointSet, m: Metric | str = Metric.L2) -> np.ndarray:
    """All C(n,2) distances in ascending order, duplicates kept."""
    if P.n < 2:
        raise EmptyInputError("need at least two points")
    iu, ju = np.triu_indices(P.n, k=1)
    dx = P.xs[iu] - P.xs[ju]
    dy = P.ys[iu] - P.ys[ju]
    if Metric.parse(m) is Metric.L1:
        d = np.abs(dx) + np.abs(dy)
    else:
        d = np.sqrt(dx * dx + dy * dy)
    d.sort()
    return d


def max_pairwise_distance(P: PointSet, m: Metric | str = Metric.L2) -> float:
    if P.n < 2:
        return 0.0
    if Metric.parse(m) is Metric.L1:
        # the farthest pair spans the rotated coordinate with the larger range
        u = P.xs + P.ys
        v = P.xs - P.ys
        pairs = [(int(u.argmax()), int(u.argmin())), (int(v.argmax()), int(v.argmin()))]
        return max(point_dist(P, i, j, Metric.L1) for i, j in pairs)
    # farthest pair lies on the convex hull
    hull = _hull_indices(P)
    hx, hy = P.xs[hull], P.ys[hull]
    dx = hx[:, None] - hx[None, :]
    dy = hy[:, None] - hy[None, :]
    return float(np.sqrt(dx * dx + dy * dy).max())


def _hull_indices(P: PointSet) -> np.ndarray:
    # monotone chain on the x-sorted order
    order = P.by_x
    xs, ys = P.xs, P.ys

    def cross(o, a, b):
        return (xs[a] - xs[o]) * (ys[b] - ys[o]) - (ys[a] - ys[o]) * (xs[b] - xs[o])

    lower: list[int] = []
    for i in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(int(i))
    upper: list[int] = []
    for i in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(int(i))
    return np.unique(np.array(lower + upper, dtype=np.int64))


@dataclass(frozen=True)
class RadiusInterval:
    """Half-open radius interval (lo, hi]."""

    lo: float = 0.0
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi}]")

    def __contains__(self, r: float) -> bool:
        return self.lo < r <= self.hi

    def contains(self, r: float) -> bool:
        return self.lo < r <= self.hi

    def interior(self, r: float) -> bool:
        return self.lo < r < self.hi

    def midpoint(self) -> float:
        if math.isinf(self.hi):
            return 2.0 * self.lo + 1.0
        mid = 0.5 * (self.lo + self.hi)
        if not self.lo < mid < self.hi:
            # adjacent floats; no radius strictly inside
            return self.hi
        return mid

    def sample(self, k: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """k radii strictly inside the interval."""
        hi = self.hi if math.isfinite(self.hi) else 2.0 * self.lo + 2.0
        rng = rng or np.random.default_rng(0)
        t = rng.uniform(0.02, 0.98, size=k)
        return self.lo + t * (hi - self.lo)

    def __repr__(self) -> str:
        return f"({self.lo!r}, {self.hi!r}]"


class DecisionOracle:
    """Monotone feasibility predicate with memoization and a call counter."""

    def __init__(self, predicate: Callable[[float], bool], name: str = "", memoize: bool = True):
        self._predicate = predicate
        self.name = name
        self.call_count = 0
        self._memo: dict[float, bool] | None = {} if memoize else None

    def feasible(self, r: float) -> bool:
        r = float(r)
        if self._memo is not None:
            hit = self._memo.get(r)
            if hit is not None:
                return hit
        self.call_count += 1
        out = bool(self._predicate(r))
        if self._memo is not None:
            self._memo[r] = out
        return out

    __call__ = feasible


# observers receive every interval produced by a parametric step
_observers: list[Callable[[RadiusInterval, str], None]] = []


def emit_interval(I: RadiusInterval, source: str) -> RadiusInterval:
    for cb in _observers:
        cb(I, source)
    return I


@contextmanager
def observe_intervals(callback: Callable[[RadiusInterval, str], None]) -> Iterator[None]:
    _observers.append(callback)
    try:
        yield
    finally:
        _observers.remove(callback)


@dataclass
class IntervalLog:
    """Collects emitted intervals, handy in tests and reports."""

    entries: list[tuple[str, RadiusInterval]] = field(default_factory=list)

    def __call__(self, I: RadiusInterval, source: str) -> None:
        self.entries.append((source, I))

    def violations(self, rstar: float) -> list[tuple[str, RadiusInterval]]:
        return [(s, I) for s, I in self.entries if not I.contains(rstar)]


def interval_shrink(I: RadiusInterval, candidates, d: Callable[[float], bool]) -> RadiusInterval:
    """Narrow I so that no candidate lies strictly inside it.

    Median selection over the surviving candidates, so the oracle is asked
    O(log k) times and the input does not need to be sorted.
    """
    vals = np.asarray(candidates, dtype=np.float64).ravel()
    lo, hi = I.lo, I.hi
    if vals.size:
        vals = vals[(vals > lo) & (vals < hi)]
    while vals.size:
        k = vals.size // 2
        med = float(np.partition(vals, k)[k])
        if d(med):
            hi = med
            vals = vals[vals < med]
        else:
            lo = med
            vals = vals[vals > med]
    if lo == I.lo and hi == I.hi:
        return I
    return RadiusInterval(lo, hi)


def smallest_feasible(sorted_unique: np.ndarray, d: Callable[[float], bool]) -> int:
    """Index of the first feasible value, or len when none is."""
    lo, hi = 0, len(sorted_unique)
    while lo < hi:
        mid = (lo + hi) // 2
        if d(float(sorted_unique[mid])):
            hi = mid
        else:
            lo = mid + 1
    return lo


def verify_rstar(r: float, P: PointSet, m: Metric | str, d: Callable[[float], bool], tol: float = 1e-9) -> float:
    """Snap r to the pairwise distance it stands for and certify optimality."""
    m = Metric.parse(m)
    exact = m is Metric.L1 and P.integer_mode
    slack = 0.0 if exact else tol * max(1.0, abs(r))
    near = np.unique(_near_distances(r - slack, r + slack, P, m))
    if near.size == 0:
        raise ConsistencyError(f"no pairwise distance within tolerance of {r!r}")
    k = smallest_feasible(near, d)
    if k == near.size:
        raise ConsistencyError(f"no pairwise distance near {r!r} is feasible")
    dstar = float(near[k])
    if dstar > 0:
        # no edge appears strictly between the predecessor distance and
        # dstar, so the radius just below dstar decides the predecessor
        below = float(np.nextafter(dstar, -math.inf))
        if d(below):
            raise ConsistencyError(f"a distance below {dstar!r} is already feasible")
    return dstar


# the quadratic scan is replaced by range reporting beyond this size
_SCAN_LIMIT = 2048


def _near_distances(lo: float, hi: float, P: PointSet, m: Metric) -> np.ndarray:
    if m is Metric.L1 and P.n > _SCAN_LIMIT and lo > 0:
        from .rsp_l1 import window_values

        return window_values(P, lo, hi)
    near, _ = _scan.window_distances(P.xs, P.ys, m.code, lo, hi)
    return near
