"""Principal nested submanifolds: a backward, nonlinear generalisation of PCA.

Typical use::

    from pnsm import FitConfig, fit_nested
    result = fit_nested(points, FitConfig(radius=0.5, dims=(2, 1)))
    curve = result.level(1).points
"""

__version__ = "0.1.0"

from .cloud import PointCloud, read_cloud, write_cloud
from .embeddings import EmbeddingSpec, embed_angles, recover_angles, retract, torus_viz
from .field import aggregated_direction, bias_sum, weights_at
from .generators import ScenarioSpec, gen_euclidean, gen_shape, generate
from .local_spectral import (local_covariance, neighbors_within, precompute_frames,
                             spectral_frame)
from .metrics import (avg_silhouette, geodesic_variation, metric_sweep, mse, outlier_filter,
                      prop_variation)
from .projection import FitConfig, NestedResult, fit_nested, pca_projection, project_point

__all__ = [
    "PointCloud", "read_cloud", "write_cloud",
    "EmbeddingSpec", "embed_angles", "recover_angles", "retract", "torus_viz",
    "aggregated_direction", "bias_sum", "weights_at",
    "ScenarioSpec", "gen_euclidean", "gen_shape", "generate",
    "local_covariance", "neighbors_within", "precompute_frames", "spectral_frame",
    "avg_silhouette", "geodesic_variation", "metric_sweep", "mse", "outlier_filter",
    "prop_variation",
    "FitConfig", "NestedResult", "fit_nested", "pca_projection", "project_point",
]
