"""Synthetic point clouds around curves in R^3 and in the angle plane.

Euclidean cases place Gaussian noise in the normal plane of a space curve::

    x_i = gamma(t_i) + xi_1 v_1(t_i) + xi_2 v_2(t_i)

Shape cases perturb an angle-plane curve along its normalised second
derivative (or, for straight curves where that vanishes, its left unit
normal) and are embedded afterwards with :func:`pnsm.embeddings.embed_angles`.

Randomness comes from PCG64 streams spawned from one ``SeedSequence``: the
first child draws the curve parameters t, the second the noise amplitudes.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

from .embeddings import EmbeddingSpec
from .errors import FrameDegenerate

_DEGENERATE = 1e-12

EUCLIDEAN_CASES = ("euclid_line", "euclid_circle", "euclid_involute")
SPHERE_CASES = ("sphere_circle", "sphere_tennis", "sphere_involute")
TORUS_CASES = ("torus_circle_major", "torus_circle_minor", "torus_involute")
ALL_CASES = EUCLIDEAN_CASES + SPHERE_CASES + TORUS_CASES

_EUCLIDEAN_SIGMAS = {
    "euclid_line": (0.1, 0.05),
    "euclid_circle": (0.1, 0.05),
    "euclid_involute": (0.09, 0.03),
}


@dataclass(frozen=True)
class ScenarioSpec:
    case: str
    n: int = 10_000
    sigma1: float | None = None
    sigma2: float | None = None
    sigma: float = 0.1
    seed: int = 0
    strict_interval: bool = False

    def __post_init__(self):
        case = self.case.replace("-", "_")
        if case not in ALL_CASES:
            raise ValueError(f"unknown case {self.case!r}; choose from {', '.join(ALL_CASES)}")
        object.__setattr__(self, "case", case)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if case in EUCLIDEAN_CASES:
            s1, s2 = _EUCLIDEAN_SIGMAS[case]
            if self.sigma1 is None:
                object.__setattr__(self, "sigma1", s1)
            if self.sigma2 is None:
                object.__setattr__(self, "sigma2", s2)
        for s in (self.sigma1, self.sigma2, self.sigma):
            if s is not None and s < 0:
                raise ValueError("noise standard deviations must be non-negative")

    @property
    def is_euclidean(self):
        return self.case in EUCLIDEAN_CASES

    @property
    def embedding(self):
        if self.is_euclidean:
            return EmbeddingSpec.euclidean(3)
        return EmbeddingSpec.sphere() if self.case in SPHERE_CASES else EmbeddingSpec.torus()

    @property
    def interval(self):
        case = self.case
        if case == "euclid_line":
            return 0.0, 1.0
        if case == "euclid_circle":
            return (0.0, 1.0) if self.strict_interval else (0.0, 2 * np.pi)
        if case == "euclid_involute":
            return 0.0, 6 * np.pi
        if case == "sphere_involute":
            return np.pi / 2, 9 * np.pi / 2
        if case == "torus_involute":
            return np.pi / 2, 19 * np.pi / 2
        return 0.0, 2 * np.pi


def _streams(seed):
    t_seq, noise_seq = SeedSequence(seed).spawn(2)
    return Generator(PCG64(t_seq)), Generator(PCG64(noise_seq))


# space curves: each returns (gamma, d/dt gamma, d2/dt2 gamma) with shape (n, 3)

def _line(t):
    z = np.zeros_like(t)
    return (np.column_stack((t, z, z)), np.column_stack((np.ones_like(t), z, z)),
            np.column_stack((z, z, z)))


def _circle(t):
    c, s, z = np.cos(t), np.sin(t), np.zeros_like(t)
    return (np.column_stack((c, s, z)), np.column_stack((-s, c, z)),
            np.column_stack((-c, -s, z)))


def _conical_involute(t):
    c, s = np.cos(t), np.sin(t)
    g = np.column_stack((t * c, t * s, t)) / 6
    dg = np.column_stack((c - t * s, s + t * c, np.ones_like(t))) / 6
    ddg = np.column_stack((-2 * s - t * c, 2 * c - t * s, np.zeros_like(t))) / 6
    return g, dg, ddg


def space_curve(case, t):
    t = np.asarray(t, dtype=float)
    return {"euclid_line": _line, "euclid_circle": _circle,
            "euclid_involute": _conical_involute}[case](t)


def noise_frame(case, t):
    """Unit normal directions ``(v1, v2)`` carrying the two noise amplitudes."""
    t = np.asarray(t, dtype=float)
    n = len(t)
    if case == "euclid_line":
        return np.tile([0.0, 1.0, 0.0], (n, 1)), np.tile([0.0, 0.0, 1.0], (n, 1))
    if case == "euclid_circle":
        return (np.tile([0.0, 0.0, 1.0], (n, 1)),
                np.column_stack((np.cos(t), np.sin(t), np.zeros(n))))
    _, dg, ddg = space_curve(case, t)
    acc = np.linalg.norm(ddg, axis=1)
    if np.any(acc < _DEGENERATE):
        raise FrameDegenerate("second derivative vanishes; Frenet frame undefined")
    tangent = dg / np.linalg.norm(dg, axis=1, keepdims=True)
    # Frenet normal: the part of the acceleration orthogonal to the tangent
    normal = ddg - np.einsum("ij,ij->i", ddg, tangent)[:, None] * tangent
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    binormal = np.cross(tangent, normal)
    binormal /= np.linalg.norm(binormal, axis=1, keepdims=True)
    s2, c2 = np.sin(2 * t)[:, None], np.cos(2 * t)[:, None]
    return s2 * binormal + c2 * normal, c2 * binormal - s2 * normal


@dataclass
class Sample:
    points: np.ndarray
    t: np.ndarray
    spec: ScenarioSpec


def gen_euclidean(spec):
    if not spec.is_euclidean:
        raise ValueError(f"{spec.case} is not a Euclidean case")
    t_rng, noise_rng = _streams(spec.seed)
    lo, hi = spec.interval
    t = t_rng.uniform(lo, hi, spec.n)
    xi = noise_rng.standard_normal((spec.n, 2)) * np.array([spec.sigma1, spec.sigma2])
    g, _, _ = space_curve(spec.case, t)
    v1, v2 = noise_frame(spec.case, t)
    return Sample(g + xi[:, :1] * v1 + xi[:, 1:] * v2, t, spec)


# angle-plane curves: each returns (gamma, gamma', gamma'') with shape (n, 2)

def _straight(t, base, direction):
    n = len(t)
    base, direction = np.asarray(base, float), np.asarray(direction, float)
    return base + t[:, None] * direction, np.tile(direction, (n, 1)), np.zeros((n, 2))


def _planar_spiral(t):
    c, s = np.cos(t), np.sin(t)
    g = np.column_stack((t * c, t * s)) / 10
    dg = np.column_stack((c - t * s, s + t * c)) / 10
    ddg = np.column_stack((-2 * s - t * c, 2 * c - t * s)) / 10
    return g, dg, ddg


def _tennis(t):
    # phi = arctan(tan^3 t -/+ pi/2), psi = arccos(sqrt3 sin t cos t)
    shift = np.where(t < np.pi, -np.pi / 2, np.pi / 2)
    s = np.tan(t)
    sec2 = 1.0 + s * s
    u = s ** 3 + shift
    du = 3 * s * s * sec2
    ddu = (6 * s + 12 * s ** 3) * sec2
    phi = np.arctan(u)
    dphi = du / (1 + u * u)
    ddphi = ddu / (1 + u * u) - 2 * u * du * du / (1 + u * u) ** 2

    w = np.sqrt(3) * np.sin(t) * np.cos(t)
    dw = np.sqrt(3) * np.cos(2 * t)
    ddw = -2 * np.sqrt(3) * np.sin(2 * t)
    root = np.sqrt(1 - w * w)
    psi = np.arccos(w)
    dpsi = -dw / root
    ddpsi = -ddw / root - w * dw * dw / root ** 3
    return (np.column_stack((phi, psi)), np.column_stack((dphi, dpsi)),
            np.column_stack((ddphi, ddpsi)))


def angle_curve(case, t):
    t = np.asarray(t, dtype=float)
    if case in ("sphere_circle", "torus_circle_major"):
        return _straight(t, (0.0, 0.0), (1.0, 0.0))
    if case == "torus_circle_minor":
        return _straight(t, (-2 * np.pi / 3, 0.0), (0.0, 1.0))
    if case == "sphere_tennis":
        return _tennis(t)
    if case in ("sphere_involute", "torus_involute"):
        return _planar_spiral(t)
    raise ValueError(f"{case} is not a shape case")


def angle_noise_direction(case, t):
    _, dg, ddg = angle_curve(case, t)
    acc = np.linalg.norm(ddg, axis=1, keepdims=True)
    speed = np.linalg.norm(dg, axis=1, keepdims=True)
    flat = acc[:, 0] < _DEGENERATE
    if np.any(flat & (speed[:, 0] < _DEGENERATE)):
        raise FrameDegenerate("curve is stationary; no normal direction")
    left_normal = np.column_stack((-dg[:, 1], dg[:, 0])) / np.where(speed > 0, speed, 1.0)
    return np.where(flat[:, None], left_normal, ddg / np.where(flat[:, None], 1.0, acc))


def gen_shape(spec):
    """Noisy angle pairs ``(phi, psi)`` for a sphere or torus case."""
    if spec.is_euclidean:
        raise ValueError(f"{spec.case} is not a shape case")
    t_rng, noise_rng = _streams(spec.seed)
    lo, hi = spec.interval
    t = t_rng.uniform(lo, hi, spec.n)
    xi = noise_rng.standard_normal(spec.n) * spec.sigma
    g, _, _ = angle_curve(spec.case, t)
    return Sample(g + xi[:, None] * angle_noise_direction(spec.case, t), t, spec)


def generate(spec):
    return gen_euclidean(spec) if spec.is_euclidean else gen_shape(spec)
