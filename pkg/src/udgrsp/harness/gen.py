"""Seeded point-set generators."""
from __future__ import annotations

import math

import numpy as np

from ..core_geom import PointSet

DISTRIBUTIONS = ("uniform-square", "clustered", "grid-jitter", "collinear")


def gen_points(n: int, distribution: str = "uniform-square", seed: int = 0, integer_mode: bool = False) -> PointSet:
    """Deterministic per (n, distribution, seed, integer_mode); coordinates
    lie in [0, n) except for the collinear family, which is (i, 0)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng([int(seed), int(n), DISTRIBUTIONS.index(distribution) if distribution in DISTRIBUTIONS else -1])
    if distribution == "collinear":
        return PointSet.from_arrays(np.arange(n, dtype=np.float64), np.zeros(n))
    if distribution == "uniform-square":
        pts = rng.uniform(0.0, n, (n, 2))
    elif distribution == "clustered":
        k = max(1, round(math.sqrt(n) / 2))
        centers = rng.uniform(0.0, n, (k, 2))
        spread = n / (4.0 * math.sqrt(k))
        pts = centers[rng.integers(0, k, n)] + rng.normal(0.0, spread, (n, 2))
        pts = np.clip(pts, 0.0, np.nextafter(float(n), 0.0))
    elif distribution == "grid-jitter":
        side = math.ceil(math.sqrt(n))
        step = n / side
        idx = np.arange(n)
        base = np.stack([idx % side, idx // side], axis=1).astype(np.float64) + 0.5
        pts = (base + rng.uniform(-0.25, 0.25, (n, 2))) * step
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    if integer_mode:
        pts = np.floor(pts)
    return PointSet.from_points(pts)


def far_target(P: PointSet, s: int = 0) -> int:
    """Index of the point farthest from s, lowest index on ties."""
    d = np.hypot(P.xs - P.xs[s], P.ys - P.ys[s])
    return int(np.argmax(d))
