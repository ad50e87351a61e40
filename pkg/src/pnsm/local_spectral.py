"""Radius-r local covariances and their ascending eigen-decompositions.

For each sample ``x_i`` the local covariance is the second moment of its
radius-r neighbourhood taken about ``x_i`` itself (not the neighbourhood
mean)::

    S_i = sum_j (x_j - x_i)(x_j - x_i)^T 1(|x_j - x_i| <= r) / #{j : |x_j - x_i| <= r}

``x_i`` always counts as its own neighbour, so the denominator is at least 1.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .errors import EigenFailure

# candidate searches are widened by this relative pad, then re-checked exactly
_QUERY_PAD = 1e-9
_BLOCK_ELEMENTS = 1 << 21


def _points(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, float))


class NeighborIndex:
    """Exact radius queries ``|x_j - c| <= r`` over a fixed sample set."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=float)
        self._tree = cKDTree(self.points) if len(self.points) else None
        self._sqnorms = np.einsum("ij,ij->i", self.points, self.points)

    def query(self, center, r):
        if self._tree is None:
            return np.empty(0, dtype=np.intp)
        center = np.asarray(center, dtype=float)
        cand = np.asarray(self._tree.query_ball_point(center, r * (1 + _QUERY_PAD) + _QUERY_PAD),
                          dtype=np.intp)
        cand.sort()
        dist = np.linalg.norm(self.points[cand] - center, axis=1)
        return cand[dist <= r]

    def query_many(self, centers, r):
        """Neighbour lists for several centres as CSR-style ``(indptr, indices, sqdist)``.

        Candidates come from the BLAS expansion |c|^2 + |x|^2 - 2 c.x with a
        round-off margin; membership is then decided on exact differences.
        """
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        m = len(centers)
        if not len(self.points):
            return np.zeros(m + 1, np.intp), np.empty(0, np.intp), np.empty(0)
        block = max(1, _BLOCK_ELEMENTS // len(self.points))
        parts = [self._candidates(centers[a:a + block], r) for a in range(0, m, block)]
        rows = np.concatenate([p[0] + a for p, a in zip(parts, range(0, m, block))])
        cols = np.concatenate([p[1] for p in parts])
        sq = np.concatenate([p[2] for p in parts])
        indptr = np.zeros(m + 1, dtype=np.intp)
        np.cumsum(np.bincount(rows, minlength=m), out=indptr[1:])
        return indptr, cols.astype(np.intp), sq

    def _candidates(self, centers, r):
        # |c|^2 + |x|^2 - 2 c.x <= r^2 + pad (|c|^2 + |x|^2 + r^2), evaluated in place
        shrink = 1.0 - _QUERY_PAD
        gram = centers @ self.points.T
        gram *= -2.0
        gram += shrink * np.einsum("ij,ij->i", centers, centers)[:, None]
        gram += shrink * self._sqnorms
        rows, cols = np.nonzero(gram <= r * r * (1.0 + _QUERY_PAD))
        diff = self.points[cols] - centers[rows]
        sq = np.einsum("ij,ij->i", diff, diff)
        keep = sq <= r * r
        return rows[keep], cols[keep], sq[keep]


def neighbors_within(cloud, center, r):
    """Indices ``j`` with ``|x_j - center| <= r`` (boundary included), ascending."""
    if r <= 0:
        raise ValueError("radius must be positive")
    pts = _points(cloud)
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dist = np.linalg.norm(pts - center, axis=1)
    return np.flatnonzero(dist <= r)


def _covariance_from(points, i, idx):
    diff = points[idx] - points[i]
    return diff.T @ diff / len(idx)


def local_covariance(cloud, i, r):
    if r <= 0:
        raise ValueError("radius must be positive")
    pts = _points(cloud)
    return _covariance_from(pts, i, neighbors_within(pts, pts[i], r))


@dataclass(frozen=True)
class SpectralFrame:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    neighbor_count: int = 0

    def direction(self, k):
        """Unit eigenvector of the k-th smallest eigenvalue (0-based)."""
        return self.eigenvectors[:, k]

    def projector(self, k):
        v = self.eigenvectors[:, k]
        return np.outer(v, v)


def spectral_frame(sigma, neighbor_count=0):
    sigma = np.asarray(sigma, dtype=float)
    if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-10):
        raise ValueError("matrix is not symmetric")
    try:
        vals, vecs = np.linalg.eigh(sigma)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    return SpectralFrame(vals, vecs, int(neighbor_count))


class FrameSet:
    """Spectral frames of every sample, stored as stacked arrays.

    Behaves like a read-only sequence of :class:`SpectralFrame`. Packed
    rank-one projectors ``v_k v_k^T`` are built lazily and cached, since the
    fitting loop reuses them on every iteration.
    """

    def __init__(self, eigenvalues, eigenvectors, neighbor_counts, radius):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self.neighbor_counts = neighbor_counts
        self.radius = radius
        self._packed = (0, None)

    def __len__(self):
        return len(self.eigenvalues)

    def __getitem__(self, i):
        return SpectralFrame(self.eigenvalues[i], self.eigenvectors[i], int(self.neighbor_counts[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dim(self):
        return self.eigenvectors.shape[1]

    def packed_projectors(self, count):
        """``(n, count * T)`` lower triangles of the first ``count`` projectors.

        T = D(D+1)/2 and the columns are grouped by direction. Only the most
        recent ``count`` is cached, since a nested fit uses one codimension
        per level.
        """
        if self._packed[0] != count:
            rows, cols = np.tril_indices(self.dim)
            v = self.eigenvectors[:, :, :count]
            packed = v[:, rows, :] * v[:, cols, :]
            self._packed = (count, np.ascontiguousarray(
                packed.transpose(0, 2, 1)).reshape(len(v), -1))
        return self._packed[1]


def precompute_frames(cloud, r, index=None):
    """Local spectral frame of every sample, in input order."""
    if r <= 0:
        raise ValueError("radius must be positive")
    pts = _points(cloud)
    n, dim = pts.shape
    index = index or NeighborIndex(pts)
    indptr, cols, _ = index.query_many(pts, r)
    covs = np.empty((n, dim, dim))
    for i in range(n):
        covs[i] = _covariance_from(pts, i, cols[indptr[i]:indptr[i + 1]])
    try:
        vals, vecs = np.linalg.eigh(covs)
    except np.linalg.LinAlgError:
        for i in range(n):
            try:
                np.linalg.eigh(covs[i])
            except np.linalg.LinAlgError as exc:
                raise EigenFailure(f"eigensolver failed for sample {i}", index=i) from exc
        raise
    return FrameSet(vals, vecs, np.diff(indptr), r)
