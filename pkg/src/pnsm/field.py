"""Smoothly weighted local quantities evaluated at an arbitrary query point z.

Weights use the compactly supported bump ``(1 - |z - x_i|^2 / r^2)^beta``
(C^2 at the boundary for ``beta >= 3``), normalised to sum to one. From them
come the reference point ``mu(z) = sum_i alpha_i(z) x_i`` and, for every
direction index k (0 = smallest local eigenvalue), the aggregated direction
``u_k(z)``: the top eigenvector of ``sum_i alpha_i(z) v_{i,k} v_{i,k}^T``.
The bias sum over the first K directions is

    sum_{k<K} u_k u_k^T (z - mu(z)),

whose zero set is the fitted submanifold of codimension K.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .errors import AmbiguousDirection, EmptyNeighborhood
from .local_spectral import NeighborIndex, _points

AMBIGUITY_GAP = 1e-10
DEFAULT_BETA = 3
DEFAULT_SUPPORT = 0.9


def bump(sqdist, r, beta=DEFAULT_BETA):
    """Unnormalised weight as a function of squared distance; zero outside the ball."""
    sqdist = np.asarray(sqdist, dtype=float)
    inside = sqdist <= r * r
    return np.where(inside, np.clip(1.0 - sqdist / (r * r), 0.0, None) ** beta, 0.0)


def weights_at(z, cloud, r, beta=DEFAULT_BETA, index=None):
    """Normalised weights as a sparse ``(indices, weights)`` pair.

    Only samples strictly inside the ball get a positive weight; samples on
    the boundary or outside contribute exactly zero and are omitted.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    pts = _points(cloud)
    z = np.asarray(z, dtype=float)
    index = index or NeighborIndex(pts)
    idx = index.query(z, r)
    diff = pts[idx] - z
    w = bump(np.einsum("ij,ij->i", diff, diff), r, beta)
    total = w.sum()
    if total <= 0.0:
        raise EmptyNeighborhood(f"no sample within radius {r} of the query point")
    keep = w > 0
    return idx[keep], w[keep] / total


def aggregated_direction(frames, indices, weights, k):
    """Top eigenvector of the weighted sum of the k-th rank-one projectors."""
    indices = np.asarray(indices)
    if len(indices) == 0:
        raise EmptyNeighborhood("aggregation needs at least one weighted sample")
    v = frames.eigenvectors[indices, :, k]
    m = np.einsum("n,ni,nj->ij", np.asarray(weights, float), v, v)
    vals, vecs = np.linalg.eigh(m)
    if vals[-1] - vals[-2] < AMBIGUITY_GAP:
        raise AmbiguousDirection(
            f"direction {k}: top eigenvalues {vals[-2]:.3g} and {vals[-1]:.3g} coincide")
    return vecs[:, -1]


@dataclass(frozen=True)
class FieldEvaluation:
    query: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    mu: np.ndarray
    directions: np.ndarray
    bias_sum: np.ndarray
    support_ok: bool


@dataclass
class BatchField:
    """Field quantities at many query points at once.

    ``empty[m]`` marks queries with no weighted sample (other entries of that
    row are meaningless). ``gaps[m, k]`` is the spectral gap under direction k.
    """

    mu: np.ndarray
    directions: np.ndarray
    gaps: np.ndarray
    empty: np.ndarray

    @property
    def ambiguous(self):
        return ~self.empty & np.any(self.gaps < AMBIGUITY_GAP, axis=1)

    def bias(self, z):
        resid = z - self.mu
        coef = np.einsum("mkd,md->mk", self.directions, resid)
        return np.einsum("mk,mkd->md", coef, self.directions)


def evaluate_field(z, index, frames, r, codim, beta=DEFAULT_BETA):
    """Batched mu and aggregated directions for the rows of ``z``.

    Each row is computed independently of the others, so results do not
    depend on how queries are grouped into batches.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    m, dim = z.shape
    pts = index.points
    indptr, cols, sq = index.query_many(z, r)
    w = bump(sq, r, beta)
    rows = np.repeat(np.arange(m), np.diff(indptr))
    totals = np.bincount(rows, weights=w, minlength=m)
    empty = ~(totals > 0.0)
    safe = np.where(empty, 1.0, totals)
    alpha = csr_matrix((w / safe[rows], cols, indptr), shape=(m, len(pts)))

    mu = alpha @ pts
    # eigh reads only the lower triangle, so the upper one is left at zero
    rows_t, cols_t = np.tril_indices(dim)
    packed = (alpha @ frames.packed_projectors(codim)).reshape(m, codim, len(rows_t))
    agg = np.zeros((m, codim, dim, dim))
    agg[:, :, rows_t, cols_t] = packed
    vals, vecs = np.linalg.eigh(agg)
    directions = np.ascontiguousarray(vecs[..., -1])
    gaps = vals[..., -1] - vals[..., -2]
    return BatchField(mu, directions, gaps, empty)


def bias_sum(z, cloud, frames, r, codim, c=DEFAULT_SUPPORT, beta=DEFAULT_BETA, index=None):
    """Evaluate the cumulative bias of the first ``codim`` directions at z."""
    pts = _points(cloud)
    dim = pts.shape[1]
    if not 1 <= codim <= dim:
        raise ValueError(f"codimension must lie in [1, {dim}], got {codim}")
    z = np.asarray(z, dtype=float)
    index = index or NeighborIndex(pts)
    idx, w = weights_at(z, pts, r, beta, index=index)
    mu = w @ pts[idx]
    dirs = np.array([aggregated_direction(frames, idx, w, k) for k in range(codim)])
    resid = z - mu
    total = (dirs @ resid) @ dirs
    support_ok = bool(np.min(np.linalg.norm(pts - z, axis=1)) <= c * r)
    return FieldEvaluation(z, idx, w, mu, dirs, total, support_ok)
