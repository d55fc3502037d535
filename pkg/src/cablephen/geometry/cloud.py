"""Point-cloud cleaning and resampling."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .types import PointCloud


def remove_outliers(cloud: PointCloud, k_neighbors: int = 8, std_ratio: float = 2.0) -> PointCloud:
    """Statistical outlier removal on mean k-nearest-neighbour distance.

    A point is dropped when its mean distance to its ``k_neighbors`` nearest
    neighbours exceeds ``mean + std_ratio * std`` over the whole cloud. Clouds
    with ``<= k_neighbors`` points pass through unchanged.
    """
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    n = len(cloud)
    if n <= k_neighbors:
        return cloud
    dist, _ = cKDTree(cloud.points).query(cloud.points, k=k_neighbors + 1)
    mean_d = dist[:, 1:].mean(axis=1)
    limit = mean_d.mean() + std_ratio * mean_d.std()
    return cloud.select(mean_d <= limit)


def crop_to_region(cloud: PointCloud, lower, upper) -> PointCloud:
    """Keep points strictly inside the axis-aligned box (lower, upper)."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower >= upper):
        raise ValueError("crop box needs lower < upper on every axis")
    p = cloud.points
    keep = np.all((p > lower) & (p < upper), axis=1)
    return cloud.select(keep)


def poisson_disk_sample(cloud: PointCloud, radius: float, seed: int = 0) -> PointCloud:
    """Greedy maximal Poisson-disk subset of ``cloud``.

    Candidates are visited in a seeded random order; a candidate is accepted
    unless an accepted point lies closer than ``radius``. The result has all
    pairwise distances >= radius and every rejected input point lies within
    ``radius`` of some accepted point.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    n = len(cloud)
    if n == 0:
        return cloud
    order = np.random.default_rng(seed).permutation(n)
    tree = cKDTree(cloud.points)
    # query_ball_point is inclusive; shave one ulp so exactly-radius pairs coexist
    neighbours = tree.query_ball_point(cloud.points, np.nextafter(radius, 0.0))
    blocked = np.zeros(n, dtype=bool)
    keep = []
    for i in order:
        if blocked[i]:
            continue
        keep.append(i)
        blocked[neighbours[i]] = True
    keep = np.sort(np.asarray(keep, dtype=np.int64))
    return cloud.select(keep)
