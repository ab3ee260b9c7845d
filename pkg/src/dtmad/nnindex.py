"""Exact k-nearest-neighbor queries over a fixed dataset.

Two independent query routes are maintained:

* an accelerated route — a kd-tree (``scipy.spatial.cKDTree``) for d >= 2,
  or a sorted-coordinate sliding-window search for d == 1 — used for all
  batch work;
* a brute-force route used as the correctness oracle.

Both routes recompute distances with the same float64 expression and break
ties at the k-th distance by smallest point index, so they return identical
results bit for bit. The accelerated structures are only ever used to
produce candidate supersets; they never decide final distances.

The index is immutable after construction; concurrent queries need no
synchronization and results are independent of the ``workers`` degree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .data import Dataset

# Relative slack applied when a candidate set must provably contain the true
# top-k despite last-ulp disagreement between tree-internal and recomputed
# distances. Drift is a few ulps (~1e-16); 1e-9 is overwhelming margin.
_TIE_RTOL = 1e-9

# Below this k the 1-D moment fast path falls back to direct window sums;
# prefix-sum cancellation error is only worth it for large windows.
_PREFIX_MIN_K = 64

_CHUNK_BUDGET = 16_000_000  # float64 scratch elements per batch chunk


@dataclass(frozen=True)
class NeighborList:
    """k neighbor ids and their Euclidean distances, sorted (distance, id)."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[0]


def _rowwise_distances(points: np.ndarray, other) -> np.ndarray:
    """Euclidean distances between rows of `points` and `other` ((d,) or (m, d)).

    The coordinate loop fixes the summation order, so every query route
    produces bit-identical distances for identical point pairs regardless
    of array shapes or chunking; ties then break consistently.
    """
    other = np.asarray(other)
    if points.shape[-1] == 1:
        return np.abs(points[..., 0] - other[..., 0])
    s = (points[..., 0] - other[..., 0]) ** 2
    for j in range(1, points.shape[-1]):
        s = s + (points[..., j] - other[..., j]) ** 2
    return np.sqrt(s)


def _row_sort_by_distance_then_index(dist, idx):
    """Sort each row by (distance, index). Relies on stable argsort."""
    order = np.argsort(idx, axis=1, kind="stable")
    rows = np.arange(dist.shape[0])[:, None]
    dist, idx = dist[rows, order], idx[rows, order]
    order = np.argsort(dist, axis=1, kind="stable")
    return dist[rows, order], idx[rows, order]


class NeighborIndex:
    """Immutable exact k-NN index over one dataset."""

    def __init__(self, dataset: Dataset, leafsize: int = 64):
        self.dataset = dataset
        self._points = dataset.points
        self.n = dataset.n
        self.d = dataset.d
        if self.d == 1:
            flat = self._points[:, 0]
            self._order = np.argsort(flat, kind="stable")
            self._sorted = flat[self._order]
            # extended precision keeps prefix-difference cancellation far
            # below every advertised tolerance even at n ~ 1e6
            ext = self._sorted.astype(np.longdouble)
            self._prefix1 = np.concatenate(([np.longdouble(0)], np.cumsum(ext)))
            self._prefix2 = np.concatenate(([np.longdouble(0)], np.cumsum(ext * ext)))
            self._tree = None
        else:
            self._tree = cKDTree(self._points, leafsize=leafsize)

    # -- scalar API ---------------------------------------------------------

    def query(self, x, k: int, brute: bool = False) -> NeighborList:
        """The k sample points nearest to x; ties by smallest index.

        A query point coinciding with a sample point counts that sample
        point among its neighbors at distance zero.
        """
        x = self._check_point(x)
        self._check_k(k)
        if brute:
            idx, dist = self._brute_single(x, k)
        else:
            idx, dist = self._accel_single(x, k)
        return NeighborList(indices=idx, distances=dist)

    def radius(self, x, k: int) -> float:
        """Distance to the k-th nearest sample point (the empirical p-NN
        radius at p = k/n)."""
        x = self._check_point(x)
        self._check_k(k)
        return float(self.kth_distances(x[None, :], k)[0])

    def query_batch(self, X, k: int, workers: int = 1):
        """Vectorized :meth:`query`; returns (indices, distances) of shape (Q, k)."""
        X = self._check_batch(X)
        self._check_k(k)
        out_i = np.empty((X.shape[0], k), dtype=np.int64)
        out_d = np.empty((X.shape[0], k))
        for lo, hi in self._chunks(X.shape[0], max(k, 1)):
            ci, cd = self._query_chunk(X[lo:hi], k, workers)
            out_i[lo:hi], out_d[lo:hi] = ci, cd
        return out_i, out_d

    # -- batch distance statistics (order-free, used by scorers) ------------

    def kth_distances(self, X, k: int, workers: int = 1) -> np.ndarray:
        """k-th nearest distance for each query row."""
        X = self._check_batch(X)
        self._check_k(k)
        if self.d == 1:
            return self._kth_1d(X[:, 0], k)
        out = np.empty(X.shape[0])
        for lo, hi in self._chunks(X.shape[0], k):
            out[lo:hi] = np.sort(self._candidate_distances(X[lo:hi], k, workers),
                                 axis=1)[:, k - 1]
        return out

    def neighbor_distances(self, X, k: int, workers: int = 1) -> np.ndarray:
        """(Q, k) matrix of the k smallest distances per row, sorted ascending.

        The k-distance multiset is tie-invariant, so no index tie-breaking
        is involved here.
        """
        X = self._check_batch(X)
        self._check_k(k)
        out = np.empty((X.shape[0], k))
        for lo, hi in self._chunks(X.shape[0], k):
            out[lo:hi] = np.sort(self._candidate_distances(X[lo:hi], k, workers),
                                 axis=1)
        return out

    def power_means(self, X, k: int, q: float, workers: int = 1) -> np.ndarray:
        """q-power mean of the k nearest distances for each query row.

        q = 1 is the plain mean, q = inf the k-th distance. For large finite
        q the maximum distance is factored out before exponentiation so the
        computation cannot overflow.
        """
        X = self._check_batch(X)
        self._check_k(k)
        if q != np.inf and q < 1:
            raise ValueError(f"need q >= 1, got {q}")
        if q == np.inf:
            return self.kth_distances(X, k, workers)
        if self.d == 1 and q in (1.0, 2.0) and k >= _PREFIX_MIN_K:
            return self._moment_mean_1d(X[:, 0], k, int(q))
        out = np.empty(X.shape[0])
        for lo, hi in self._chunks(X.shape[0], k):
            dist = self._candidate_distances(X[lo:hi], k, workers)
            out[lo:hi] = _power_mean_rows(dist, q)
        return out

    # -- internals: generic (tree) route ------------------------------------

    def _check_point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.shape != (self.d,):
            raise ValueError(f"query point must have shape ({self.d},), got {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("query point must be finite")
        return x

    def _check_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None] if self.d == 1 else X[None, :]
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"query batch must have shape (Q, {self.d})")
        if not np.isfinite(X).all():
            raise ValueError("query points must be finite")
        return X

    def _check_k(self, k: int):
        if not 1 <= k <= self.n:
            raise ValueError(f"k must be in [1, {self.n}], got {k}")

    def _chunks(self, total: int, k: int):
        rows = max(1, _CHUNK_BUDGET // max(1, k * max(self.d, 2)))
        for lo in range(0, total, rows):
            yield lo, min(total, lo + rows)

    def _candidate_indices(self, X: np.ndarray, k: int, workers: int) -> np.ndarray:
        """(Q, k) candidate ids whose recomputed distances contain the true
        k smallest as a multiset (exact up to boundary ties within ~ulp)."""
        if self.d == 1:
            starts, _, _ = self._windows_1d(X[:, 0], k)
            return self._order[starts[:, None] + np.arange(k)[None, :]]
        _, idx = self._tree.query(X, k=k, workers=workers)
        if k == 1:
            idx = idx[:, None]
        return idx.astype(np.int64, copy=False)

    def _candidate_distances(self, X: np.ndarray, k: int, workers: int) -> np.ndarray:
        idx = self._candidate_indices(X, k, workers)
        return _rowwise_distances(self._points[idx], X[:, None, :])

    def _query_chunk(self, X: np.ndarray, k: int, workers: int):
        """Tie-exact batch query: candidates + own distances + (d, idx) sort,
        with a per-point exact fallback whenever a tie could straddle the
        k-th position."""
        kq = min(k + 1, self.n)
        idx = self._candidate_indices(X, kq, workers)
        dist = _rowwise_distances(self._points[idx], X[:, None, :])
        dist, idx = _row_sort_by_distance_then_index(dist, idx)
        if kq > k:
            suspect = dist[:, k] <= dist[:, k - 1] * (1 + _TIE_RTOL)
        else:
            suspect = np.zeros(X.shape[0], dtype=bool)
        dist, idx = dist[:, :k], idx[:, :k]
        for row in np.flatnonzero(suspect):
            bi, bd = self._brute_single(X[row], k)
            idx[row], dist[row] = bi, bd
        return idx, dist

    def _accel_single(self, x: np.ndarray, k: int):
        idx, dist = self._query_chunk(x[None, :], k, workers=1)
        return idx[0], dist[0]

    def _brute_single(self, x: np.ndarray, k: int):
        dist = _rowwise_distances(self._points, x)
        # stable sort on distance ties by construction of arange order
        order = np.argsort(dist, kind="stable")[:k]
        return order.astype(np.int64), dist[order]

    # -- internals: 1-D sorted-window route ----------------------------------

    def _windows_1d(self, x: np.ndarray, k: int):
        """For each query value return (window start j, k-th distance,
        suspect flag). The k nearest points of a 1-D query are a contiguous
        run [j, j+k-1] of the sorted coordinates; j minimizes the window's
        max distance. The minimizer is located by binary search on the
        nondecreasing sequence s_j = v[j] + v[j+k-1] (left arm of the
        max(...) objective dominates while s_j <= 2x)."""
        v = self._sorted
        n = self.n
        jmax = n - k
        s = v[: jmax + 1] + v[k - 1:]
        jc = np.searchsorted(s, 2.0 * x, side="right") - 1
        j0 = np.clip(jc, 0, jmax)
        j1 = np.clip(jc + 1, 0, jmax)
        f0 = np.maximum(x - v[j0], v[j0 + k - 1] - x)
        f1 = np.maximum(x - v[j1], v[j1 + k - 1] - x)
        take1 = f1 < f0
        starts = np.where(take1, j1, j0)
        radii = np.where(take1, f1, f0)
        suspect = np.zeros(x.shape[0], dtype=bool)
        left = starts > 0
        suspect[left] = (x[left] - v[starts[left] - 1]) <= radii[left] * (1 + _TIE_RTOL)
        right = starts + k < n
        suspect[right] |= (v[starts[right] + k] - x[right]) <= radii[right] * (1 + _TIE_RTOL)
        return starts, radii, suspect

    def _kth_1d(self, x: np.ndarray, k: int) -> np.ndarray:
        starts, radii, suspect = self._windows_1d(x, k)
        out = radii.copy()
        for row in np.flatnonzero(suspect):
            dist = np.abs(self._sorted - x[row])
            out[row] = np.partition(dist, k - 1)[k - 1]
        return out

    def _moment_mean_1d(self, x: np.ndarray, k: int, q: int) -> np.ndarray:
        """Mean of |x - v|^q over the k-NN window via prefix sums (q in {1,2})."""
        starts, _, suspect = self._windows_1d(x, k)
        v, s1, s2 = self._sorted, self._prefix1, self._prefix2
        ends = starts + k
        mids = np.clip(np.searchsorted(v, x, side="left"), starts, ends)
        xe = x.astype(np.longdouble)
        if q == 1:
            cl = mids - starts
            cr = ends - mids
            sum_left = xe * cl - (s1[mids] - s1[starts])
            sum_right = (s1[ends] - s1[mids]) - xe * cr
            total = np.asarray(sum_left + sum_right, dtype=np.float64)
        else:
            total = (s2[ends] - s2[starts]) - 2.0 * xe * (s1[ends] - s1[starts]) \
                + k * xe * xe
            total = np.maximum(np.asarray(total, dtype=np.float64), 0.0)
        for row in np.flatnonzero(suspect):
            dist = np.abs(v - x[row])
            smallest = np.partition(dist, k - 1)[:k]
            total[row] = float(np.sum(smallest**q))
        mean = total / k
        return mean if q == 1 else np.sqrt(mean)


def _power_mean_rows(dist: np.ndarray, q: float) -> np.ndarray:
    if q == 1.0:
        return dist.mean(axis=1)
    if q == 2.0:
        return np.sqrt((dist * dist).mean(axis=1))
    top = dist.max(axis=1)
    safe = np.where(top > 0, top, 1.0)
    scaled = dist / safe[:, None]
    out = safe * (scaled**q).mean(axis=1) ** (1.0 / q)
    return np.where(top > 0, out, 0.0)


def build_index(dataset: Dataset, leafsize: int = 64) -> NeighborIndex:
    """Build the exact k-NN index for a dataset."""
    return NeighborIndex(dataset, leafsize=leafsize)


def knn_query(index: NeighborIndex, x, k: int) -> NeighborList:
    """k nearest sample points to x (self included at distance 0 when x is
    itself a sample point; ties at the k-th distance by smallest index)."""
    return index.query(x, k)


def knn_radius(index: NeighborIndex, x, k: int) -> float:
    """The k-th smallest distance from x to the sample, i.e. the empirical
    p-NN radius with p = k/n: at least k sample points lie within it."""
    return index.radius(x, k)
