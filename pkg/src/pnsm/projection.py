"""Iterative projection onto the fitted submanifolds and the backward nested fit.

A point z is moved by ``F(z) = sum_{k<K} u_k u_k^T (mu(z) - z)`` until
``|F(z)| < epsilon`` (K is the codimension ``D' - d``), then retracted onto
the embedding set. The nested fit runs this level by level from the largest
requested dimension down: level d projects the output of the previous level,
while weights and spectral frames always come from the original embedded
cloud.
"""

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .cloud import PointCloud
from .embeddings import EmbeddingSpec, embed_angles, recover_angles, retract
from .errors import (AmbiguousDirection, DegenerateRetraction, EmptyNeighborhood,
                     FitFailure, SupportWarning)
from .field import DEFAULT_BETA, DEFAULT_SUPPORT, evaluate_field
from .local_spectral import NeighborIndex, precompute_frames

logger = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
EMPTY = "empty"
AMBIGUOUS = "ambiguous"
DEGENERATE = "degenerate"
_RUNNING = ""

FAILURE_FRACTION = 0.5


@dataclass(frozen=True)
class FitConfig:
    radius: float
    dims: tuple | None = None
    epsilon: float = 1e-6
    max_iter: int = 200
    c: float = DEFAULT_SUPPORT
    beta: float = DEFAULT_BETA
    embedding: EmbeddingSpec | None = None
    seed: int = 0
    step: float = 1.0
    recompute_frames: bool = False
    tie_retries: int = 3
    tie_inflation: float = 1.05
    threads: int = 1
    chunk_size: int = 512

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.epsilon > 0 or self.max_iter < 1:
            raise ValueError("epsilon must be positive and max_iter at least 1")
        if not 0 < self.c < 1:
            raise ValueError("support constant c must lie in (0, 1)")
        if self.dims is not None:
            dims = tuple(int(d) for d in self.dims)
            if any(a <= b for a, b in zip(dims, dims[1:])):
                raise ValueError(f"dims must be strictly descending, got {dims}")
            object.__setattr__(self, "dims", dims)

    def resolve_dims(self, spec):
        """Requested dimensions, checked against the ambient dimension.

        Without an explicit request, Euclidean data gets every dimension
        ``D-1, ..., 1`` and angle data (sphere, torus) only the curve level.
        """
        dims = self.dims
        if dims is None:
            dims = (1,) if spec.is_angular else tuple(range(spec.ambient_dim - 1, 0, -1))
        bad = [d for d in dims if not 1 <= d <= spec.ambient_dim - 1]
        if bad or not dims:
            raise ValueError(
                f"target dimensions must lie in [1, {spec.ambient_dim - 1}], got {list(dims)}")
        return dims


class ProjectedPoint(NamedTuple):
    point: np.ndarray
    iterations: int
    residual: float
    converged: bool


@dataclass
class LevelResult:
    d: int
    points: np.ndarray
    fixed_points: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    status: np.ndarray
    support_ok: np.ndarray
    angles: np.ndarray | None = None

    @property
    def converged(self):
        return self.status == CONVERGED

    @property
    def projected_cloud(self):
        extra = {} if self.angles is None else {"phi": self.angles[:, 0], "psi": self.angles[:, 1]}
        return PointCloud(self.points, source=f"level d={self.d}", extra=extra)


@dataclass
class NestedResult:
    embedding: EmbeddingSpec
    config: FitConfig
    embedded: np.ndarray
    levels: list = field(default_factory=list)

    @property
    def dims(self):
        return [lvl.d for lvl in self.levels]

    def level(self, d):
        for lvl in self.levels:
            if lvl.d == d:
                return lvl
        raise KeyError(f"no level with d={d}")


def _iterate(z0, index, frames, radius, codim, cfg):
    z = np.array(z0, dtype=float)
    m = len(z)
    iterations = np.zeros(m, dtype=np.int64)
    residual = np.full(m, np.nan)
    status = np.full(m, _RUNNING, dtype=object)
    active = np.arange(m)
    step = np.zeros_like(z)
    for it in range(1, cfg.max_iter + 1):
        f = evaluate_field(z[active], index, frames, radius, codim, cfg.beta)
        move = -f.bias(z[active])
        norms = np.linalg.norm(move, axis=1)
        iterations[active] = it

        empty = f.empty
        lost = active[empty]
        # last valid iterate: undo the step that left every ball
        z[lost] -= step[lost]
        status[lost] = EMPTY

        ok = ~empty
        residual[active[ok]] = norms[ok]
        amb = ok & f.ambiguous
        status[active[amb]] = AMBIGUOUS
        done = ok & ~amb & (norms < cfg.epsilon)
        status[active[done]] = CONVERGED

        go = ok & ~amb & ~done
        moving = active[go]
        step[moving] = cfg.step * move[go]
        z[moving] += step[moving]
        active = moving
        if not len(active):
            break
    status[active] = MAX_ITER
    return z, iterations, residual, status


def _iterate_with_retries(z0, index, frames, radius, codim, cfg):
    z, iterations, residual, status = _iterate(z0, index, frames, radius, codim, cfg)
    for attempt in range(1, cfg.tie_retries + 1):
        tied = np.flatnonzero(status == AMBIGUOUS)
        if not len(tied):
            break
        wider = radius * cfg.tie_inflation ** attempt
        logger.info("retrying %d tied points with radius %.6g", len(tied), wider)
        rz, rit, rres, rstat = _iterate(z0[tied], index, frames, wider, codim, cfg)
        z[tied], residual[tied], status[tied] = rz, rres, rstat
        iterations[tied] += rit
    return z, iterations, residual, status


def _safe_retract(z, spec, status):
    try:
        return retract(z, spec)
    except DegenerateRetraction:
        out = z.copy()
        for i in range(len(z)):
            try:
                out[i] = retract(z[i], spec)
            except DegenerateRetraction:
                status[i] = DEGENERATE
        return out


def _project_level(start, index, frames, cfg, codim, spec):
    n = len(start)
    chunks = [np.arange(a, min(a + cfg.chunk_size, n)) for a in range(0, n, cfg.chunk_size)]

    def run(rows):
        return _iterate_with_retries(start[rows], index, frames, cfg.radius, codim, cfg)

    if cfg.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(rows) for rows in chunks]

    fixed = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, start.shape[1]))
    iterations = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, np.int64)
    residual = np.concatenate([p[2] for p in parts]) if parts else np.empty(0)
    status = np.concatenate([p[3] for p in parts]) if parts else np.empty(0, object)
    points = _safe_retract(fixed, spec, status)
    if n:
        nearest, _ = index._tree.query(fixed, k=1)
        support_ok = nearest <= cfg.c * cfg.radius
    else:
        support_ok = np.empty(0, dtype=bool)
    return points, fixed, iterations, residual, status.astype(str), support_ok


def project_point(z0, cloud, frames, config, d, index=None):
    """Project a single point onto the fitted submanifold of dimension d.

    Raises :class:`EmptyNeighborhood` when the starting point has no sample
    within the radius and :class:`AmbiguousDirection` when ties persist after
    the radius retries. An iterate that later leaves every ball stops the
    iteration and the last valid iterate is returned, unconverged.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    dim = pts.shape[1]
    if not 1 <= d < dim:
        raise ValueError(f"target dimension must lie in [1, {dim - 1}], got {d}")
    spec = config.embedding or EmbeddingSpec.euclidean(dim)
    index = index or NeighborIndex(pts)
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    points, _, iterations, residual, status, _ = _project_level(
        z0, index, frames, config, dim - d, spec)
    if status[0] == EMPTY and iterations[0] == 1:
        raise EmptyNeighborhood("starting point has no sample within the radius")
    if status[0] == AMBIGUOUS:
        raise AmbiguousDirection("aggregated direction stayed ambiguous after retries")
    return ProjectedPoint(points[0], int(iterations[0]), float(residual[0]),
                          bool(status[0] == CONVERGED))


def embed_input(raw, spec):
    pts = raw.points if isinstance(raw, PointCloud) else np.atleast_2d(np.asarray(raw, float))
    if spec.is_angular:
        if pts.shape[1] != 2:
            raise ValueError(f"{spec.kind} input must be angle pairs, got {pts.shape[1]} columns")
        return embed_angles(pts, spec)
    if pts.shape[1] != spec.ambient_dim:
        raise ValueError(f"expected {spec.ambient_dim} columns, got {pts.shape[1]}")
    return pts.copy()


def fit_nested(raw, config):
    """Backward nested fit: one projected cloud per requested dimension.

    Aborts with :class:`FitFailure` if more than half the points fail to
    converge at any level; otherwise failed points are kept (last iterate)
    and flagged in the level's ``status``.
    """
    pts = raw.points if isinstance(raw, PointCloud) else np.atleast_2d(np.asarray(raw, float))
    spec = config.embedding or EmbeddingSpec.euclidean(pts.shape[1])
    cfg = replace(config, embedding=spec)
    if len(pts) < 1:
        raise ValueError("cannot fit an empty point cloud")
    embedded = embed_input(pts, spec)
    dims = cfg.resolve_dims(spec)

    index = NeighborIndex(embedded)
    frames = precompute_frames(embedded, cfg.radius, index)
    result = NestedResult(spec, cfg, embedded)
    current = embedded
    for d in dims:
        if cfg.recompute_frames and result.levels:
            # extension: refit on the previous level's output
            index = NeighborIndex(current)
            frames = precompute_frames(current, cfg.radius, index)
        codim = spec.ambient_dim - d
        points, fixed, iterations, residual, status, support_ok = _project_level(
            current, index, frames, cfg, codim, spec)
        angles = None
        if spec.is_angular:
            good = status != DEGENERATE
            angles = np.full((len(points), 2), np.nan)
            angles[good] = recover_angles(points[good], spec)
        level = LevelResult(d, points, fixed, iterations, residual, status, support_ok, angles)
        failed = np.count_nonzero(~level.converged)
        logger.info("level d=%d: %d/%d converged, max iterations %d", d,
                    len(points) - failed, len(points), iterations.max(initial=0))
        if failed > FAILURE_FRACTION * len(points):
            raise FitFailure(f"{failed} of {len(points)} points failed at level d={d}")
        if not support_ok.all():
            warnings.warn(f"level d={d}: {np.count_nonzero(~support_ok)} points outside the "
                          f"c*r support", SupportWarning, stacklevel=2)
        result.levels.append(level)
        current = points
    return result


def pca_projection(cloud, d):
    """Project onto the affine span of the top-d principal components."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, float))
    dim = pts.shape[1]
    if not 1 <= d <= dim:
        raise ValueError(f"target dimension must lie in [1, {dim}], got {d}")
    if d == dim:
        return pts.copy()
    mean = pts.mean(axis=0)
    centered = pts - mean
    _, vecs = np.linalg.eigh(centered.T @ centered / len(pts))
    top = vecs[:, -d:]
    return mean + (centered @ top) @ top.T
