"""Datasets, partitions, weights, file ingestion and synthetic generators."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ArgumentError, DimensionError, FormatError

__all__ = [
    "DataSet",
    "Partition",
    "WeightVector",
    "as_points",
    "load_dataset",
    "save_dataset",
    "generate_two_moons",
    "generate_clusters_with_outliers",
    "generate_graded_line",
    "generate_clump_and_spread",
    "replicate_by_weights",
]


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataSet:
    """Feature vectors with optional ground-truth labels.

    Parameters
    ----------
    points : array_like, shape (n, N)
        Feature vectors. A 1-D array is read as n points in R^1.
    labels : array_like of int, optional
        Ground-truth cluster index per point.
    name : str
        Identifier used in reports.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "data"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise DimensionError("points must be a 2-D array (n, N)")
        n, dim = pts.shape
        if n < 1 or dim < 1:
            raise DimensionError("a dataset needs n >= 1 points of dimension N >= 1")
        if not np.all(np.isfinite(pts)):
            raise ArgumentError("points must be finite")
        object.__setattr__(self, "points", _frozen(pts))
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (n,):
                raise DimensionError("labels must have length n")
            if lab.size and (not np.issubdtype(lab.dtype, np.integer)):
                if not np.all(np.equal(np.mod(lab, 1), 0)):
                    raise ArgumentError("labels must be integers")
            lab = lab.astype(np.int64)
            if lab.size and lab.min() < 0:
                raise ArgumentError("labels must be nonnegative")
            object.__setattr__(self, "labels", _frozen(lab))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class Partition:
    """Assignment of each point to one of K clusters.

    Empty clusters are allowed; they are listed by ``empty_clusters``.
    """

    assignment: np.ndarray
    K: int = field(default=-1)

    def __post_init__(self):
        a = np.asarray(self.assignment)
        if a.ndim != 1:
            raise DimensionError("assignment must be 1-D")
        if a.size and not np.issubdtype(a.dtype, np.integer):
            if not np.all(np.equal(np.mod(a, 1), 0)):
                raise ArgumentError("assignment must contain integers")
        a = a.astype(np.int64)
        if a.size and a.min() < 0:
            raise ArgumentError("cluster indices must be nonnegative")
        K = int(self.K)
        if K < 0:
            K = int(a.max()) + 1 if a.size else 1
        if a.size and a.max() >= K:
            raise ArgumentError(f"cluster index {int(a.max())} is not < K={K}")
        object.__setattr__(self, "assignment", _frozen(a))
        object.__setattr__(self, "K", K)

    @property
    def n(self) -> int:
        return self.assignment.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)

    @property
    def empty_clusters(self) -> tuple:
        return tuple(int(k) for k in np.flatnonzero(self.sizes() == 0))

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative per-point weights with at least one positive entry."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError("weights must be a nonempty 1-D array")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ArgumentError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ArgumentError("at least one weight must be positive")
        object.__setattr__(self, "w", _frozen(w))

    def __len__(self):
        return self.w.size

    def __array__(self, dtype=None, copy=None):
        return self.w if dtype is None else self.w.astype(dtype)


def as_points(data) -> np.ndarray:
    """Return the (n, N) float array behind a DataSet or array-like."""
    if isinstance(data, DataSet):
        return data.points
    return DataSet(data).points


def _as_labels(x) -> np.ndarray:
    if isinstance(x, Partition):
        return x.assignment
    return Partition(x).assignment


# ---------------------------------------------------------------- file I/O

def _parse_float(tok, row):
    try:
        return float(tok)
    except ValueError:
        raise FormatError(f"row {row}: cannot parse {tok!r} as a number") from None


def _load_csv(path: Path, name: str) -> DataSet:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = None
    first = [c.strip() for c in rows[0]]
    try:
        [float(c) for c in first]
    except ValueError:
        header = first
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    label_col = None
    if header is not None and "label" in header:
        label_col = header.index("label")
    values = []
    for i, r in enumerate(rows, start=2 if header is not None else 1):
        if len(r) != width:
            raise FormatError(f"row {i}: expected {width} columns, found {len(r)}")
        values.append([_parse_float(c.strip(), i) for c in r])
    arr = np.array(values, dtype=np.float64)
    labels = None
    if label_col is not None:
        labels = arr[:, label_col]
        if not np.all(np.equal(np.mod(labels, 1), 0)) or np.any(labels < 0):
            raise FormatError("label column must hold nonnegative integers")
        arr = np.delete(arr, label_col, axis=1)
        labels = labels.astype(np.int64)
    if arr.shape[1] == 0:
        raise DimensionError("no feature columns")
    return DataSet(arr, labels, name)


def _load_json(path: Path, name: str) -> DataSet:
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(obj, dict) or "points" not in obj:
        raise FormatError(f"{path}: expected an object with a 'points' field")
    pts = obj["points"]
    if not isinstance(pts, list) or not pts:
        raise FormatError(f"{path}: 'points' must be a nonempty list")
    width = None
    for i, row in enumerate(pts):
        if not isinstance(row, list):
            row = [row]
            pts[i] = row
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DimensionError(f"row {i + 1}: expected {width} values, found {len(row)}")
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise FormatError(f"row {i + 1}: non-numeric value {v!r}")
    labels = obj.get("labels")
    return DataSet(np.array(pts, dtype=np.float64), labels, obj.get("name", name))


def load_dataset(path, format: Optional[str] = None) -> DataSet:
    """Read a dataset from CSV or JSON.

    CSV files may have one header row; a column named ``label`` holds the
    ground truth and every other column is a feature. JSON files hold an
    object ``{"points": [[...], ...], "labels": [...]}``.

    Parameters
    ----------
    path : str or Path
    format : {'csv', 'json'}, optional
        Inferred from the file suffix when omitted.
    """
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format not in ("csv", "json"):
        raise ArgumentError(f"unknown format {format!r}")
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    loader = _load_csv if format == "csv" else _load_json
    return loader(path, path.stem)


def save_dataset(data: DataSet, path, format: Optional[str] = None) -> None:
    """Write a dataset in the format read by :func:`load_dataset`."""
    path = Path(path)
    if format is None:
        format = "json" if path.suffix.lower() == ".json" else "csv"
    if format == "json":
        obj = {"name": data.name, "points": data.points.tolist()}
        if data.labels is not None:
            obj["labels"] = data.labels.tolist()
        path.write_text(json.dumps(obj))
        return
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        head = [f"x{i}" for i in range(data.dim)]
        if data.labels is not None:
            head.append("label")
        wr.writerow(head)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            wr.writerow(row)


# ---------------------------------------------------------------- generators

def _graded_parameter(m: int, ratio: float) -> np.ndarray:
    # exponential warp: spacing grows geometrically, last/first spacing = ratio
    u = np.linspace(0.0, 1.0, m)
    if ratio == 1.0:
        return u
    return (ratio ** u - 1.0) / (ratio - 1.0)


def generate_two_moons(
    n_per_moon: int,
    noise: float = 0.05,
    density_profile: str = "uniform",
    ratio: Optional[float] = None,
    seed: int = 0,
    offset: float = 1.1,
):
    """Two interleaved half circles, optionally with graded density.

    Parameters
    ----------
    n_per_moon : int
        Points per moon (>= 2).
    noise : float
        Standard deviation of isotropic Gaussian jitter.
    density_profile : {'uniform', 'graded'}
        With 'graded', points along the upper moon are spaced so that the
        spacing at its sparse end is ``ratio`` times the spacing at its
        dense end (near (1, 0)). The lower moon is graded by sqrt(ratio),
        which keeps the global density mode on the upper moon.
    ratio : float
        Density ratio (> 1), required for 'graded'.
    seed : int
    offset : float
        Downward shift of the lower moon with respect to the classic
        interleaved layout (0 gives the usual moons). The default leaves a
        clear gap so that an adaptive kernel in the sparse tips does not
        bridge the moons.

    Returns
    -------
    data : DataSet
    truth : Partition
    """
    if int(n_per_moon) != n_per_moon or n_per_moon < 2:
        raise ArgumentError("n_per_moon must be an integer >= 2")
    if noise < 0:
        raise ArgumentError("noise must be nonnegative")
    m = int(n_per_moon)
    if density_profile == "uniform":
        r1 = r2 = 1.0
    elif density_profile == "graded":
        if ratio is None or not ratio > 1:
            raise ArgumentError("graded profile needs ratio > 1")
        r1, r2 = float(ratio), float(np.sqrt(ratio))
    else:
        raise ArgumentError(f"unknown density profile {density_profile!r}")
    rng = np.random.default_rng(seed)
    a1 = np.pi * _graded_parameter(m, r1)
    upper = np.column_stack([np.cos(a1), np.sin(a1)])
    a2 = np.pi * (1.0 - _graded_parameter(m, r2)[::-1])
    lower = np.column_stack([1.0 - np.cos(a2), 0.5 - offset - np.sin(a2)])
    X = np.vstack([upper, lower]) + rng.normal(0.0, noise, size=(2 * m, 2))
    y = np.repeat([0, 1], m)
    name = "two_moons" if r1 == 1.0 else f"two_moons_graded{ratio:g}"
    return DataSet(X, y, name), Partition(y, 2)


def generate_clusters_with_outliers(
    n_dense: int,
    n_outliers: int,
    separation: float,
    seed: int = 0,
    blob_gap: float = 1.5,
    blob_std: float = 0.3,
    outlier_std: float = 0.15,
):
    """Two dense Gaussian blobs plus a small, distant group of outliers.

    Each blob has ``n_dense`` points; blob centres are ``blob_gap`` apart on
    the x-axis. The outliers form a tight group above the blobs, at
    distance at least ``separation`` times the blob diameter from every blob
    point. Outliers take the label of the nearest blob.

    Returns
    -------
    data : DataSet
        Blob points first, then outliers.
    truth : Partition
    """
    if n_dense < 4:
        raise ArgumentError("n_dense must be >= 4")
    if n_outliers < 0:
        raise ArgumentError("n_outliers must be nonnegative")
    if separation < 0:
        raise ArgumentError("separation must be nonnegative")
    rng = np.random.default_rng(seed)
    b1 = rng.normal(0.0, blob_std, size=(n_dense, 2))
    b2 = rng.normal(0.0, blob_std, size=(n_dense, 2)) + [blob_gap, 0.0]
    blobs = np.vstack([b1, b2])
    labels = np.repeat([0, 1], n_dense)
    if n_outliers == 0:
        return DataSet(blobs, labels, "blobs"), Partition(labels, 2)
    diam = max(cdist(b1, b1).max(), cdist(b2, b2).max())
    jitter = rng.normal(0.0, outlier_std, size=(n_outliers, 2))
    height = blobs[:, 1].max() + separation * diam + 2 * outlier_std
    while True:
        out = jitter + [blob_gap / 2, height]
        if cdist(out, blobs).min() >= separation * diam:
            break
        height += 0.1 * max(diam, 1e-12)
    centres = np.array([b1.mean(0), b2.mean(0)])
    out_labels = np.argmin(cdist(out, centres), axis=1)
    X = np.vstack([blobs, out])
    y = np.concatenate([labels, out_labels])
    return DataSet(X, y, "blobs_with_outliers"), Partition(y, 2)


def generate_graded_line(n: int, ratio: float = 20.0, length: float = 1.0) -> DataSet:
    """Points on a segment that get progressively denser along it.

    Consecutive spacings shrink geometrically; the first spacing is
    ``ratio`` times the last. Deterministic (no noise).
    """
    if int(n) != n or n < 2:
        raise ArgumentError("n must be an integer >= 2")
    if not ratio >= 1:
        raise ArgumentError("ratio must be >= 1")
    n = int(n)
    gaps = float(ratio) ** (-np.arange(n - 1) / max(n - 2, 1))
    t = np.concatenate([[0.0], np.cumsum(gaps)]) / gaps.sum()
    t[-1] = 1.0
    return DataSet(length * t[:, None], None, f"graded_line{ratio:g}")


def generate_clump_and_spread(n_clump: int = 8, n_spread: int = 6, clump_std: float = 0.1,
                              spread_width: float = 6.0, seed: int = 0):
    """1D sample: a tight Gaussian clump at 0 plus points spread uniformly.

    The spread points are drawn on [-spread_width/2, spread_width/2]
    excluding the band of 3 clump standard deviations around 0, so the two
    groups do not overlap.

    Returns
    -------
    data : DataSet
        Clump points first.
    truth : Partition
        0 for the clump, 1 for the spread points.
    """
    if n_clump < 1 or n_spread < 0:
        raise ArgumentError("need n_clump >= 1 and n_spread >= 0")
    if not clump_std > 0 or not spread_width > 6 * clump_std:
        raise ArgumentError("spread_width must exceed 6 clump standard deviations")
    rng = np.random.default_rng(seed)
    clump = rng.normal(0.0, clump_std, n_clump)
    half, gap = spread_width / 2, 3 * clump_std
    u = rng.uniform(gap, half, n_spread)
    spread = np.where(rng.random(n_spread) < 0.5, -u, u)
    X = np.concatenate([clump, spread])[:, None]
    y = np.repeat([0, 1], [n_clump, n_spread])
    return DataSet(X, y, "clump_and_spread"), Partition(y, 2)


def replicate_by_weights(data, w) -> DataSet:
    """Replace each point p by ``w[p]`` copies at the same location."""
    pts = as_points(data)
    w = np.asarray(w.w if isinstance(w, WeightVector) else w, dtype=np.float64)
    if w.shape != (pts.shape[0],):
        raise DimensionError("one weight per point is required")
    if np.any(w < 1) or not np.all(np.equal(np.mod(w, 1), 0)):
        raise ArgumentError("replication weights must be positive integers")
    reps = w.astype(np.int64)
    labels = None
    name = "data"
    if isinstance(data, DataSet):
        name = data.name + "_replicated"
        if data.labels is not None:
            labels = np.repeat(data.labels, reps)
    return DataSet(np.repeat(pts, reps, axis=0), labels, name)
