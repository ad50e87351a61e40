"""Evaluation metrics for projected clouds.

* average silhouette index against class labels,
* proportion of variation, where the total variation of a cloud is the
  minimum over base points of the summed squared shortest-path distances on
  its symmetrised k-nearest-neighbour graph,
* mean squared displacement between a cloud and its projection,

plus the radius-neighbour outlier filter applied before fitting.
"""

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree
from sklearn.metrics import silhouette_score

from .cloud import PointCloud, format_float
from .errors import DisconnectedGraph, LabelError, ShapeMismatch
from .local_spectral import NeighborIndex

DEFAULT_K = 20
CUMULATIVE = "cumulative"
STEPWISE = "stepwise"


def _points(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, float))


def avg_silhouette(points, labels=None):
    """Mean silhouette over all points; singleton clusters contribute 0."""
    if isinstance(points, PointCloud):
        labels = points.labels if labels is None else labels
    pts = _points(points)
    if labels is None:
        raise LabelError("silhouette needs labels")
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise LabelError(f"silhouette needs at least 2 distinct labels, got {len(uniq)}")
    if len(uniq) == len(labels):
        return 0.0
    return float(silhouette_score(pts, labels, metric="euclidean"))


def knn_graph(points, k):
    """Symmetrised kNN graph (union of directed edges) with Euclidean weights."""
    pts = _points(points)
    n = len(pts)
    k = min(k, n - 1)
    if k < 1:
        return coo_matrix((n, n)).tocsr()
    dist, nbr = cKDTree(pts).query(pts, k=k + 1)
    drop = nbr == np.arange(n)[:, None]
    # with coincident points self may be crowded out; drop the farthest instead
    drop[~drop.any(axis=1), -1] = True
    src = np.repeat(np.arange(n), k)
    dst = nbr[~drop]
    w = dist[~drop]
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    key, first = np.unique(lo * n + hi, return_index=True)
    # zero-length edges between coincident points are kept as explicit zeros
    return coo_matrix((w[first], (lo[first], hi[first])), shape=(n, n)).tocsr()


def geodesic_variation(points, k=DEFAULT_K, chunk=256):
    """Minimum over base points of summed squared graph distances.

    A disconnected graph triggers a :class:`DisconnectedGraph` warning and
    the largest component is used.
    """
    pts = _points(points)
    n = len(pts)
    if n < 2:
        return 0.0
    graph = knn_graph(pts, k)
    ncomp, comp = connected_components(graph, directed=False)
    if ncomp > 1:
        sizes = np.bincount(comp)
        keep = np.flatnonzero(comp == np.argmax(sizes))
        warnings.warn(f"kNN graph has {ncomp} components; using the largest "
                      f"({len(keep)} of {n} points)", DisconnectedGraph, stacklevel=2)
        graph = graph[keep][:, keep]
        n = len(keep)
    best = np.inf
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        dist = dijkstra(graph, directed=False, indices=rows)
        best = min(best, float(np.min(np.einsum("ij,ij->i", dist, dist))))
    return best


def prop_variation(points, baseline_total, k=DEFAULT_K):
    if not baseline_total > 0:
        raise ValueError("baseline total variation must be positive")
    return geodesic_variation(points, k) / baseline_total


def mse(original, projected):
    a, b = _points(original), _points(projected)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.einsum("ij,ij->", diff, diff) / len(a))


def outlier_filter(cloud, r=6.0, min_neighbors=25):
    """Drop points with fewer than ``min_neighbors`` other points within r.

    Single pass: counts always refer to the unfiltered cloud. Returns the
    kept cloud and the removed indices.
    """
    if r <= 0 or min_neighbors < 0:
        raise ValueError("need r > 0 and min_neighbors >= 0")
    pts = _points(cloud)
    if isinstance(cloud, PointCloud):
        base = cloud
    else:
        base = PointCloud(pts)
    if min_neighbors == 0 or len(pts) == 0:
        return base.subset(np.arange(len(pts))), np.empty(0, dtype=np.intp)
    indptr, _, _ = NeighborIndex(pts).query_many(pts, r)
    others = np.diff(indptr) - 1
    keep = others >= min_neighbors
    return base.subset(np.flatnonzero(keep)), np.flatnonzero(~keep)


@dataclass
class MetricRow:
    d: int
    mse: float
    prop_variation: float
    avg_silhouette: float | None = None


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_csv(self):
        with_sil = any(r.avg_silhouette is not None for r in self.rows)
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        header = ["d"] + (["avg_silhouette"] if with_sil else []) + ["prop_variation", "mse"]
        writer.writerow(header)
        for r in self.rows:
            line = [str(r.d)]
            if with_sil:
                line.append("" if r.avg_silhouette is None else format_float(r.avg_silhouette))
            line += [format_float(r.prop_variation), format_float(r.mse)]
            writer.writerow(line)
        return out.getvalue()

    def to_text(self):
        lines = ["# metric report", "metadata: " + json.dumps(self.metadata, sort_keys=True), ""]
        lines.append(f"{'d':>4}  {'silhouette':>12}  {'prop_var':>12}  {'mse':>14}")
        for r in self.rows:
            sil = "-" if r.avg_silhouette is None else f"{r.avg_silhouette:.6f}"
            lines.append(f"{r.d:>4}  {sil:>12}  {r.prop_variation:>12.6f}  {r.mse:>14.8g}")
        return "\n".join(lines) + "\n"


def metric_sweep(original, levels, labels=None, k=DEFAULT_K, mode=CUMULATIVE):
    """Metrics for every projected level.

    ``levels`` maps d to the projected points. In cumulative mode variation
    is relative to ``original``; in stepwise mode each level is relative to
    the next higher level in the mapping (the original for the highest).
    """
    if mode not in (CUMULATIVE, STEPWISE):
        raise ValueError(f"unknown normalisation mode {mode!r}")
    base_pts = _points(original)
    raw_total = geodesic_variation(base_pts, k)
    report = MetricReport(metadata={"k": k, "mode": mode, "graph": "symmetrised kNN",
                                    "n": len(base_pts), "raw_variation": raw_total})
    previous_total = raw_total
    for d in sorted(levels, reverse=True):
        pts = _points(levels[d])
        total = geodesic_variation(pts, k)
        denom = raw_total if mode == CUMULATIVE else previous_total
        sil = avg_silhouette(pts, labels) if labels is not None else None
        report.rows.append(MetricRow(d, mse(base_pts, pts), total / denom, sil))
        previous_total = total
    return report
