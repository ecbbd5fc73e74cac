"""
Neighbour queries over planar points.

PointIndex answers the three queries the statistics need, exactly:
radius counts around arbitrary centres (inclusive or strict), the distance from
every point to its nearest other point, and ordered pair counts below a set of
distances. It is backed by scipy's cKDTree; the brute_* functions compute the
same quantities in O(n^2) and serve as test oracles.
"""

import numpy as np
from scipy.spatial import cKDTree


def _strict(radius):
    # d < r  <=>  d <= largest float below r
    return np.nextafter(np.asarray(radius, dtype=float), 0.0)


class PointIndex:
    """
    Space-partitioning index over an (n, 2) coordinate array.
    """

    def __init__(self, coords):
        self.coords = np.asarray(coords, dtype=float).reshape(-1, 2)
        self.n = len(self.coords)
        self.tree = cKDTree(self.coords) if self.n else None

    def count_within(self, centers, radius, inclusive=True):
        """
        Number of indexed points within radius of each centre.

        Args:
            centers: (m, 2) array of query centres
            radius: Search radius in meters
            inclusive: Count points at exactly radius (<=) when True, else (<)

        Returns:
            int64 array of length m
        """
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        if self.n == 0 or len(centers) == 0:
            return np.zeros(len(centers), dtype=np.int64)
        r = float(radius) if inclusive else float(_strict(radius))
        counts = self.tree.query_ball_point(centers, r, return_length=True)
        return np.asarray(counts, dtype=np.int64)

    def nearest_distances(self):
        """
        Distance from every point to its nearest other point.
        """
        if self.n < 2:
            raise ValueError('nearest-neighbour distances need at least 2 points')
        distances, _ = self.tree.query(self.coords, k=2)
        return distances[:, 1]

    def ordered_pair_counts(self, distances):
        """
        For each d, the number of ordered pairs (i, j), i != j, with dist(i, j) < d.
        """
        distances = np.asarray(distances, dtype=float)
        if self.n < 2:
            return np.zeros(len(distances), dtype=np.int64)
        counts = self.tree.count_neighbors(self.tree, _strict(distances), cumulative=True)
        # self pairs (distance 0) are always counted once per point
        return np.asarray(counts, dtype=np.int64) - self.n


def _pairwise(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def brute_count_within(coords, centers, radius, inclusive=True):
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(coords) == 0:
        return np.zeros(len(centers), dtype=np.int64)
    d = _pairwise(centers, coords)
    hits = d <= radius if inclusive else d < radius
    return hits.sum(axis=1).astype(np.int64)


def brute_nearest_distances(coords):
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    d = _pairwise(coords, coords)
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1)


def brute_ordered_pair_counts(coords, distances):
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    d = _pairwise(coords, coords)
    np.fill_diagonal(d, np.inf)
    return np.array([(d < r).sum() for r in distances], dtype=np.int64)
