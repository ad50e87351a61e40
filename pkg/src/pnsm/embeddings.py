"""Ambient embedding sets: Euclidean space, the unit sphere S^2 and the flat torus T^2.

Angles are handled as ``(phi, psi)`` pairs. The sphere embedding is

    (cos psi cos phi, cos psi sin phi, sin psi)   in R^3

and the torus embedding is

    (cos phi, sin phi, cos psi, sin psi)          in R^4.

All functions accept a single point/pair or an ``(n, .)`` array of them.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRetraction, OffManifold

_NORM_FLOOR = 1e-12
_ON_MANIFOLD_TOL = 1e-9

EUCLIDEAN = "euclidean"
SPHERE = "sphere2"
TORUS = "torus2"


@dataclass(frozen=True)
class EmbeddingSpec:
    kind: str
    ambient_dim: int

    def __post_init__(self):
        expected = {SPHERE: 3, TORUS: 4}
        if self.kind == EUCLIDEAN:
            if self.ambient_dim < 1:
                raise ValueError("euclidean embedding needs a positive dimension")
        elif self.kind in expected:
            if self.ambient_dim != expected[self.kind]:
                raise ValueError(
                    f"{self.kind} lives in R^{expected[self.kind]}, got {self.ambient_dim}"
                )
        else:
            raise ValueError(f"unknown embedding kind {self.kind!r}")

    @classmethod
    def euclidean(cls, dim):
        return cls(EUCLIDEAN, int(dim))

    @classmethod
    def sphere(cls):
        return cls(SPHERE, 3)

    @classmethod
    def torus(cls):
        return cls(TORUS, 4)

    @classmethod
    def from_name(cls, name, dim=None):
        """Build a spec from a CLI-style name (``euclidean``, ``sphere``, ``torus``)."""
        name = name.lower()
        if name in ("sphere", SPHERE):
            return cls.sphere()
        if name in ("torus", TORUS):
            return cls.torus()
        if name == EUCLIDEAN:
            if dim is None:
                raise ValueError("euclidean embedding needs the data dimension")
            return cls.euclidean(dim)
        raise ValueError(f"unknown embedding {name!r}")

    @property
    def is_angular(self):
        return self.kind in (SPHERE, TORUS)


def _as_rows(a, width, what):
    arr = np.asarray(a, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != width:
        raise ValueError(f"{what} must have {width} columns, got shape {arr.shape}")
    return arr, single


def embed_angles(angles, spec):
    """Map angle pairs ``(phi, psi)`` onto the sphere or torus."""
    if not spec.is_angular:
        raise ValueError("angles are undefined for a euclidean embedding")
    ang, single = _as_rows(angles, 2, "angles")
    phi, psi = ang[:, 0], ang[:, 1]
    if spec.kind == SPHERE:
        out = np.column_stack((np.cos(psi) * np.cos(phi), np.cos(psi) * np.sin(phi), np.sin(psi)))
    else:
        out = np.column_stack((np.cos(phi), np.sin(phi), np.cos(psi), np.sin(psi)))
    return out[0] if single else out


def retract(z, spec):
    """Nearest point of the embedding set.

    Identity for Euclidean space, radial normalisation for the sphere and
    independent normalisation of ``(x1, x2)`` and ``(x3, x4)`` for the torus.
    Raises :class:`DegenerateRetraction` when a norm being divided by is
    below 1e-12, where the nearest point is not unique.
    """
    pts, single = _as_rows(z, spec.ambient_dim, "point")
    if spec.kind == EUCLIDEAN:
        out = pts.copy()
    elif spec.kind == SPHERE:
        norms = np.linalg.norm(pts, axis=1, keepdims=True)
        if np.any(norms < _NORM_FLOOR):
            raise DegenerateRetraction("cannot retract the origin onto the sphere")
        out = pts / norms
    else:
        first = np.linalg.norm(pts[:, :2], axis=1, keepdims=True)
        second = np.linalg.norm(pts[:, 2:], axis=1, keepdims=True)
        if np.any(first < _NORM_FLOOR) or np.any(second < _NORM_FLOOR):
            raise DegenerateRetraction("a coordinate pair is zero; torus retraction undefined")
        out = np.hstack((pts[:, :2] / first, pts[:, 2:] / second))
    return out[0] if single else out


def _half_open(theta):
    # atan2 gives [-pi, pi]; fold -pi onto pi so the branch is (-pi, pi]
    return np.where(theta <= -np.pi, np.pi, theta)


def recover_angles(x, spec):
    """Inverse of :func:`embed_angles`, with angles in ``(-pi, pi]``.

    For the sphere the latitude ``psi`` is returned in ``[-pi/2, pi/2]``.
    """
    if not spec.is_angular:
        raise ValueError("angles are undefined for a euclidean embedding")
    pts, single = _as_rows(x, spec.ambient_dim, "point")
    if spec.kind == SPHERE:
        if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1.0) > _ON_MANIFOLD_TOL):
            raise OffManifold("point is not on the unit sphere")
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        psi = np.arctan2(pts[:, 2], np.hypot(pts[:, 0], pts[:, 1]))
    else:
        for pair in (pts[:, :2], pts[:, 2:]):
            if np.any(np.abs(np.linalg.norm(pair, axis=1) - 1.0) > _ON_MANIFOLD_TOL):
                raise OffManifold("point is not on the flat torus")
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        psi = np.arctan2(pts[:, 3], pts[:, 2])
    out = np.column_stack((_half_open(phi), _half_open(psi)))
    return out[0] if single else out


def torus_viz(angles):
    """Place angle pairs on the ring torus in R^3 (major radius 1, minor 0.5)."""
    ang, single = _as_rows(angles, 2, "angles")
    phi, psi = ang[:, 0], ang[:, 1]
    ring = 1.0 + 0.5 * np.cos(psi)
    out = np.column_stack((ring * np.cos(phi), ring * np.sin(phi), 0.5 * np.sin(psi)))
    return out[0] if single else out
