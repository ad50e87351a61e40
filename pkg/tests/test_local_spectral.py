import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import jacobi_eigh, local_covariance as naive_covariance
from pnsm.cloud import PointCloud
from pnsm.local_spectral import (NeighborIndex, local_covariance, neighbors_within,
                                 precompute_frames, spectral_frame)


def test_neighbors_within_examples():
    cloud = PointCloud([[0.0], [1.0], [3.0]])
    assert list(neighbors_within(cloud, [0.0], 1)) == [0, 1]
    assert list(neighbors_within(cloud, [0.0], 0.5)) == [0]
    assert list(neighbors_within(cloud, [10.0], 1)) == []
    with pytest.raises(ValueError):
        neighbors_within(cloud, [0.0], 0)


def test_local_covariance_examples():
    cloud = PointCloud([[-1.0, 0], [0, 0], [1, 0]])
    np.testing.assert_allclose(local_covariance(cloud, 1, 2), np.diag([2 / 3, 0]), atol=1e-15)
    assert not local_covariance(PointCloud([[1.0, 2.0]]), 0, 5).any()
    assert not local_covariance(PointCloud([[0.0, 0], [1, 1]]), 0, 0.5).any()


def test_spectral_frame_examples():
    f = spectral_frame(np.diag([2 / 3, 0]))
    np.testing.assert_allclose(f.eigenvalues, [0, 2 / 3])
    np.testing.assert_allclose(np.abs(f.direction(0)), [0, 1])
    f = spectral_frame(np.eye(3))
    np.testing.assert_allclose(f.eigenvalues, 1)
    np.testing.assert_allclose(f.eigenvectors.T @ f.eigenvectors, np.eye(3), atol=1e-12)
    assert not spectral_frame(np.zeros((2, 2))).eigenvalues.any()
    with pytest.raises(ValueError):
        spectral_frame([[1.0, 0.5], [0.0, 1.0]])


def test_precompute_collinear():
    pts = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])
    frames = precompute_frames(pts, 100)
    line = np.array([1.0, 2.0]) / np.sqrt(5)
    for i, f in enumerate(frames):
        assert abs(f.direction(1) @ line) == pytest.approx(1.0)
        ref = jacobi_eigh(naive_covariance(pts, i, 100))[1][:, 1]
        assert abs(ref @ line) == pytest.approx(1.0)


def test_precompute_single_and_order():
    frames = precompute_frames(PointCloud([[1.0, 1.0]]), 1)
    assert len(frames) == 1 and not frames[0].eigenvalues.any()
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(10_000, 3))
    frames = precompute_frames(pts, 0.4)
    assert len(frames) == 10_000
    for i in (0, 4321, 9999):
        np.testing.assert_allclose(frames.eigenvalues[i],
                                   np.linalg.eigvalsh(local_covariance(pts, i, 0.4)),
                                   atol=1e-12)
        assert frames[i].neighbor_count == len(neighbors_within(pts, pts[i], 0.4))


def test_query_many_matches_brute_force():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, size=(500, 3))
    pts[7] = pts[8]
    centers = np.vstack([pts[:50], rng.uniform(-1, 1, size=(20, 3))])
    index = NeighborIndex(pts)
    indptr, cols, sq = index.query_many(centers, 0.35)
    for m, c in enumerate(centers):
        got = np.sort(cols[indptr[m]:indptr[m + 1]])
        np.testing.assert_array_equal(got, neighbors_within(pts, c, 0.35))
        np.testing.assert_array_equal(index.query(c, 0.35), neighbors_within(pts, c, 0.35))


def test_boundary_ties_included():
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, -0.5], [0.6, 0.0]])
    indptr, cols, _ = NeighborIndex(pts).query_many(pts[:1], 0.5)
    assert sorted(cols) == [0, 1, 2]


small_clouds = arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(2, 3)),
                      elements=st.floats(-3, 3, allow_nan=False))


@settings(max_examples=60, deadline=None)
@given(small_clouds, st.floats(0.1, 5))
def test_covariance_matches_naive(pts, r):
    for i in range(len(pts)):
        np.testing.assert_allclose(local_covariance(pts, i, r), naive_covariance(pts, i, r),
                                   atol=1e-12, rtol=0)


@settings(max_examples=60, deadline=None)
@given(small_clouds, st.floats(0.1, 5))
def test_frame_invariants(pts, r):
    frames = precompute_frames(pts, r)
    for i, f in enumerate(frames):
        assert np.all(np.diff(f.eigenvalues) >= 0) and np.all(f.eigenvalues >= -1e-10)
        v = f.eigenvectors
        np.testing.assert_allclose(v.T @ v, np.eye(len(v)), atol=1e-10)
        recon = sum(lam * np.outer(v[:, k], v[:, k]) for k, lam in enumerate(f.eigenvalues))
        assert np.linalg.norm(recon - local_covariance(pts, i, r)) <= 1e-8
        for k in range(len(v)):
            p = f.projector(k)
            np.testing.assert_allclose(p @ p, p, atol=1e-10)
            assert np.trace(p) == pytest.approx(1.0, abs=1e-10)
            flipped = np.outer(-v[:, k], -v[:, k])
            assert np.max(np.abs(flipped - p)) <= 1e-12
        rows, cols = np.tril_indices(len(v))
        packed = frames.packed_projectors(len(v))[i].reshape(len(v), -1)
        for k in range(len(v)):
            np.testing.assert_allclose(packed[k], f.projector(k)[rows, cols])


def test_jacobi_oracle_agrees_with_lapack():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.normal(size=(4, 4))
        a = a + a.T
        vals, vecs = jacobi_eigh(a)
        np.testing.assert_allclose(vals, np.linalg.eigvalsh(a), atol=1e-10)
        np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, a, atol=1e-10)
