"""Point clouds and their CSV representation.

The CSV format has a header row. Coordinate columns may have any name; the
reserved columns ``t`` (ground-truth curve parameter), ``label`` (integer
class) and ``phi``/``psi`` (recovered angles) are carried as metadata and are
not treated as coordinates. Floats are written as the shortest decimal
string that round-trips to the same double.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

RESERVED_COLUMNS = ("t", "label", "phi", "psi")


@dataclass
class PointCloud:
    points: np.ndarray
    labels: np.ndarray | None = None
    source: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite values")
        self.points = pts
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (pts.shape[0],):
                raise ValueError("labels must have one entry per point")

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def subset(self, index):
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        extra = {k: np.asarray(v)[index] for k, v in self.extra.items()}
        return PointCloud(self.points[index], labels, self.source, extra)


def format_float(x):
    return repr(float(x))


def write_csv(path, columns, names):
    """Write equally long columns under a header; only float columns are reformatted."""
    columns = [np.asarray(c) for c in columns]
    if len(columns) != len(names):
        raise ValueError("one name per column required")
    n = len(columns[0]) if columns else 0
    fmts = [format_float if c.dtype.kind == "f" else str for c in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(n):
            writer.writerow([f(c[i].item() if hasattr(c[i], "item") else c[i])
                             for f, c in zip(fmts, columns)])


def write_cloud(path, cloud, coord_names=None):
    names = list(coord_names or [f"x{j + 1}" for j in range(cloud.dim)])
    columns = [cloud.points[:, j] for j in range(cloud.dim)]
    for key in ("phi", "psi", "t"):
        if key in cloud.extra:
            names.append(key)
            columns.append(np.asarray(cloud.extra[key], dtype=float))
    if cloud.labels is not None:
        names.append("label")
        columns.append(cloud.labels)
    write_csv(path, columns, names)


def read_cloud(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        rows = [row for row in reader if row]
    table = {name: [] for name in header}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for name, value in zip(header, row):
            table[name].append(value)

    coord_names = [h for h in header if h not in RESERVED_COLUMNS]
    if not coord_names:
        raise ValueError(f"{path}: no coordinate columns")
    try:
        points = np.array([[float(v) for v in table[name]] for name in coord_names]).T
        extra = {k: np.array([float(v) for v in table[k]]) for k in ("t", "phi", "psi") if k in table}
        labels = np.array([int(v) for v in table["label"]]) if "label" in table else None
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    points = points.reshape(len(rows), len(coord_names))
    return PointCloud(points, labels, source=str(path), extra=extra)
