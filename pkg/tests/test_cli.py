import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pnsm.cli import main
from pnsm.cloud import PointCloud, read_cloud, write_cloud


def run(*argv):
    return main([str(a) for a in argv])


def usage_error(*argv):
    with pytest.raises(SystemExit) as exc:
        run(*argv)
    return exc.value.code


@pytest.fixture
def line_csv(tmp_path):
    path = tmp_path / "line.csv"
    assert run("simulate", "--case", "euclid-line", "--n", 300, "--seed", 7, "--out", path) == 0
    return path


def test_simulate(tmp_path, line_csv):
    text = line_csv.read_text().splitlines()
    assert text[0] == "x1,x2,x3,t" and len(text) == 301
    again = tmp_path / "again.csv"
    run("simulate", "--case", "euclid-line", "--n", 300, "--seed", 7, "--out", again)
    assert again.read_bytes() == line_csv.read_bytes()
    manifest = json.loads((tmp_path / "line.run-manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 7
    assert manifest["config"]["sigma1"] == 0.1
    assert usage_error("simulate", "--case", "euclid-line", "--n", 0, "--out", again) == 2
    assert usage_error("simulate", "--case", "moebius", "--out", again) == 2


def test_fit_euclidean(tmp_path, line_csv):
    out = tmp_path / "fit"
    assert run("fit", "--input", line_csv, "--radius", 0.5, "--dims", "2,1",
               "--embedding", "euclidean", "--out-dir", out) == 0
    d1 = read_cloud(out / "d1.csv")
    assert d1.n == 300 and "t" in d1.extra
    diag = (out / "diagnostics.csv").read_text().splitlines()
    assert diag[0] == "d,index,iterations,residual,converged,status,support_ok"
    assert len(diag) == 601
    manifest = json.loads((out / "run-manifest.json").read_text())
    assert manifest["config"]["dims"] == [2, 1] and manifest["config"]["epsilon"] == 1e-6
    assert usage_error("fit", "--input", line_csv, "--radius", 0.5, "--dims", "3,1",
                       "--out-dir", out) == 2
    # the flag is a set of levels; order on the command line does not matter
    run("fit", "--input", line_csv, "--radius", 0.5, "--dims", "1,2", "--out-dir", out)
    assert json.loads((out / "run-manifest.json").read_text())["config"]["dims"] == [2, 1]


def test_fit_torus_writes_angles(tmp_path):
    angles = tmp_path / "angles.csv"
    run("simulate", "--case", "torus-circle-major", "--n", 300, "--out", angles)
    out = tmp_path / "fit"
    assert run("fit", "--input", angles, "--embedding", "torus", "--dims", 1,
               "--radius", 0.5, "--out-dir", out) == 0
    assert sorted(p.name for p in out.iterdir()) == ["d1.csv", "diagnostics.csv",
                                                    "run-manifest.json"]
    header = (out / "d1.csv").read_text().splitlines()[0]
    assert header == "x1,x2,x3,x4,phi,psi,t"
    d1 = read_cloud(out / "d1.csv")
    np.testing.assert_allclose(np.cos(d1.extra["phi"]), d1.points[:, 0], atol=1e-12)


def test_fit_numerical_failure_cleans_up(tmp_path, line_csv):
    out = tmp_path / "fit"
    assert run("fit", "--input", line_csv, "--radius", 0.5, "--dims", 1, "--max-iter", 1,
               "--out-dir", out) == 3
    assert not list(out.glob("*.csv"))


def test_missing_input_is_io_error(tmp_path):
    assert run("fit", "--input", tmp_path / "nope.csv", "--radius", 1,
               "--out-dir", tmp_path) == 4
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2\n1,oops\n")
    assert run("pca", "--input", bad, "--out-dir", tmp_path) == 4


def test_pca(tmp_path, line_csv):
    out = tmp_path / "pca"
    assert run("pca", "--input", line_csv, "--dims", "3,1", "--out-dir", out) == 0
    assert (out / "d3.csv").read_text() == line_csv.read_text()
    raw, d1 = read_cloud(line_csv), read_cloud(out / "d1.csv")
    resid = np.mean(np.sum((raw.points - d1.points) ** 2, axis=1))
    assert resid == pytest.approx(0.1 ** 2 + 0.05 ** 2, rel=0.2)
    axis = tmp_path / "axis.csv"
    write_cloud(axis, PointCloud(np.column_stack((np.arange(5.0), np.zeros(5), np.zeros(5)))))
    run("pca", "--input", axis, "--dims", 1, "--out-dir", tmp_path / "axis")
    np.testing.assert_allclose(read_cloud(tmp_path / "axis" / "d1.csv").points,
                               read_cloud(axis).points, atol=1e-15)
    assert usage_error("pca", "--input", line_csv, "--dims", 4, "--out-dir", out) == 2


def test_metrics(tmp_path, line_csv):
    out = tmp_path / "m"
    assert run("metrics", "--original", line_csv, "--projected", line_csv, "--dims", 3,
               "--out-dir", out) == 0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines == ["d,prop_variation,mse", "3,1.0,0.0"]
    assert "mode" in (out / "metrics-report.txt").read_text()
    assert usage_error("metrics", "--original", line_csv, "--projected", line_csv,
                       "--out-dir", out) == 2


def test_metrics_with_labels(tmp_path):
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(size=(40, 3)), rng.normal(size=(40, 3)) + 6])
    labels = np.repeat([0, 1], 40)
    orig = tmp_path / "orig.csv"
    write_cloud(orig, PointCloud(pts, labels=labels))
    proj = tmp_path / "d2.csv"
    write_cloud(proj, PointCloud(pts * [1, 1, 0], labels=labels))
    run("metrics", "--original", orig, "--projected", proj, "--out-dir", tmp_path / "m")
    header, row = (tmp_path / "m" / "metrics.csv").read_text().splitlines()
    assert header == "d,avg_silhouette,prop_variation,mse" and row.startswith("2,")


def test_filter(tmp_path, caplog):
    rng = np.random.default_rng(1)
    pts = np.vstack([rng.normal(size=(60, 13)) * 0.5, np.full((1, 13), 40.0)])
    src = tmp_path / "cells.csv"
    write_cloud(src, PointCloud(pts))
    out = tmp_path / "kept.csv"
    assert run("filter", "--input", src, "--out", out) == 0
    assert read_cloud(out).n == 60
    assert (tmp_path / "kept.removed.csv").read_text() == "index\n60\n"
    manifest = json.loads((tmp_path / "kept.run-manifest.json").read_text())
    assert manifest["config"]["radius"] == 6.0 and manifest["config"]["min_neighbors"] == 25
    run("filter", "--input", src, "--min-neighbors", 0, "--out", out)
    np.testing.assert_array_equal(read_cloud(out).points, pts)
    with caplog.at_level(logging.WARNING):
        run("filter", "--input", src, "--radius", 1e-3, "--min-neighbors", 1, "--out", out)
    assert "every point was removed" in caplog.text
    assert out.read_text() == ",".join(f"x{j + 1}" for j in range(13)) + "\n"


def test_replay(tmp_path, line_csv):
    out = tmp_path / "fit"
    run("fit", "--input", line_csv, "--radius", 0.5, "--dims", "2,1", "--out-dir", out)
    before = {p.name: p.read_bytes() for p in out.glob("*.csv")}
    for p in out.glob("*.csv"):
        p.unlink()
    assert run("replay", out / "run-manifest.json") == 0
    assert {p.name: p.read_bytes() for p in out.glob("*.csv")} == before
    assert run("replay", tmp_path / "missing.json") == 4


def test_threads_from_environment(monkeypatch, tmp_path, line_csv):
    monkeypatch.setenv("PNSM_THREADS", "2")
    out = tmp_path / "fit"
    run("fit", "--input", line_csv, "--radius", 0.5, "--dims", 1, "--out-dir", out)
    manifest = json.loads((out / "run-manifest.json").read_text())
    assert manifest["command"] == "fit"


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 4)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_round_trip_is_exact(tmp_path_factory, pts):
    path = tmp_path_factory.mktemp("rt") / "c.csv"
    write_cloud(path, PointCloud(pts, labels=np.arange(len(pts)), extra={"t": pts[:, 0]}))
    back = read_cloud(path)
    assert back.points.tobytes() == pts.tobytes()
    assert back.extra["t"].tobytes() == pts[:, 0].copy().tobytes()
    np.testing.assert_array_equal(back.labels, np.arange(len(pts)))
