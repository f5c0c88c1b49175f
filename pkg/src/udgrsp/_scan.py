"""Brute-force O(n^2) passes over all point pairs in O(1) extra memory."""
from __future__ import annotations

import math

import numpy as np

from ._nb import jit


@jit
def _d(xs, ys, i, j, code):
    dx = xs[i] - xs[j]
    dy = ys[i] - ys[j]
    if code == 1:
        return abs(dx) + abs(dy)
    return math.sqrt(dx * dx + dy * dy)


@jit
def window_distances(xs, ys, code, lo, hi):
    """Distinct pair distances in [lo, hi] and the largest one below lo."""
    n = xs.size
    cap = 256
    out = np.empty(cap, np.float64)
    k = 0
    below = -1.0
    for i in range(n):
        for j in range(i + 1, n):
            v = _d(xs, ys, i, j, code)
            if v < lo:
                if v > below:
                    below = v
            elif v <= hi:
                seen = False
                for t in range(k):
                    if out[t] == v:
                        seen = True
                        break
                if not seen and k < cap:
                    out[k] = v
                    k += 1
    return out[:k].copy(), below


@jit
def count_between(xs, ys, code, lo, hi):
    """Number of pairs with lo < distance <= hi."""
    n = xs.size
    c = 0
    for i in range(n):
        for j in range(i + 1, n):
            v = _d(xs, ys, i, j, code)
            if v > lo and v <= hi:
                c += 1
    return c


@jit
def collect_between(xs, ys, code, lo, hi, cap):
    n = xs.size
    out = np.empty(cap, np.float64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            v = _d(xs, ys, i, j, code)
            if v > lo and v <= hi:
                if k < cap:
                    out[k] = v
                k += 1
    return out[: min(k, cap)].copy(), k
