"""Datasets, CSV ingestion, contaminated-mixture sampling and synthetic scenarios.

All randomness is driven by the Philox4x64-10 counter-based generator
(``numpy.random.Philox``), so any generated dataset is a pure function of
(spec, seed) and reproduces bit-identically across platforms for a fixed
NumPy version. Generation is single-threaded; datasets are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

NORMAL = 0
ANOMALY = 1

# CSV lines starting with this prefix hold tool metadata and are skipped on load.
COMMENT_PREFIX = "#"


class CsvFormatError(ValueError):
    """Malformed CSV content (bad cell, ragged row, empty file...)."""


def make_rng(seed: int) -> np.random.Generator:
    """Seeded counter-based generator (Philox4x64-10) used everywhere."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dataset:
    """n points in R^d, stored as an immutable (n, d) float matrix.

    Row order is stable: the row index is a durable point identifier.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("points contain NaN or infinite coordinates")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class LabeledDataset:
    """Dataset plus a per-point 0/1 flag (1 = anomaly).

    For generated data the label records the true mixture component a point
    was drawn from; it is never inferred from the coordinates.
    """

    dataset: Dataset
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.shape != (self.dataset.n,):
            raise ValueError(
                f"labels shape {lab.shape} does not match n={self.dataset.n}"
            )
        if not np.isin(lab, (NORMAL, ANOMALY)).all():
            raise ValueError("labels must be 0 (normal) or 1 (anomaly)")
        object.__setattr__(self, "labels", _freeze(lab.astype(np.int64)))

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    @property
    def points(self) -> np.ndarray:
        return self.dataset.points

    @property
    def n_anomalies(self) -> int:
        return int(self.labels.sum())

    @classmethod
    def all_normal(cls, dataset: Dataset) -> "LabeledDataset":
        return cls(dataset, np.zeros(dataset.n, dtype=np.int64))


# ---------------------------------------------------------------------------
# Point generators (mixture components)
# ---------------------------------------------------------------------------


class PointGenerator:
    """A named distribution over R^d that can draw a block of points."""

    dim: int

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError


class GaussianGenerator(PointGenerator):
    def __init__(self, mean: Sequence[float], std: float | Sequence[float] = 1.0):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.std = np.broadcast_to(np.asarray(std, dtype=float), self.mean.shape).copy()
        if np.any(self.std <= 0):
            raise ValueError("gaussian std must be positive")
        self.dim = self.mean.size

    def sample(self, rng, size):
        return rng.normal(self.mean, self.std, size=(size, self.dim))


class UniformBoxGenerator(PointGenerator):
    def __init__(self, low: Sequence[float], high: Sequence[float]):
        self.low = np.atleast_1d(np.asarray(low, dtype=float))
        self.high = np.atleast_1d(np.asarray(high, dtype=float))
        if self.low.shape != self.high.shape:
            raise ValueError("low/high must have the same length")
        if np.any(self.high <= self.low):
            raise ValueError("need high > low in every coordinate")
        self.dim = self.low.size

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size=(size, self.dim))


class UniformBallGenerator(PointGenerator):
    """Uniform over a solid Euclidean ball."""

    def __init__(self, center: Sequence[float], radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        self.dim = self.center.size

    def sample(self, rng, size):
        g = rng.normal(size=(size, self.dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        r = self.radius * rng.random(size) ** (1.0 / self.dim)
        return self.center + g / norms * r[:, None]


class PointMassGenerator(PointGenerator):
    def __init__(self, location: Sequence[float]):
        self.location = np.atleast_1d(np.asarray(location, dtype=float))
        self.dim = self.location.size

    def sample(self, rng, size):
        return np.tile(self.location, (size, 1))


_GENERATORS = {
    "gaussian": GaussianGenerator,
    "uniform": UniformBoxGenerator,
    "ball": UniformBallGenerator,
    "point": PointMassGenerator,
}


def make_generator(gen_id: str, params: Mapping) -> PointGenerator:
    if gen_id not in _GENERATORS:
        raise ValueError(
            f"unknown generator id {gen_id!r}; valid: {sorted(_GENERATORS)}"
        )
    try:
        return _GENERATORS[gen_id](**dict(params))
    except TypeError as exc:
        raise ValueError(f"invalid parameters for generator {gen_id!r}: {exc}") from exc


@dataclass(frozen=True)
class ContaminationSpec:
    """Two-component mixture (1-eps)*P0 + eps*P1 with an i.i.d. draw per point.

    normal_gen / anomaly_gen are (generator id, params) pairs, see
    :func:`make_generator`.
    """

    normal_gen: tuple
    anomaly_gen: tuple
    epsilon: float
    n: int
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.n < 1:
            raise ValueError(f"need n >= 1, got {self.n}")


def sample_contaminated(spec: ContaminationSpec) -> LabeledDataset:
    """Draw n points, each independently anomalous with probability epsilon.

    The label records the component each point was drawn from. Identical
    spec + seed gives a bit-identical dataset.
    """
    normal = make_generator(*spec.normal_gen)
    anomaly = make_generator(*spec.anomaly_gen)
    if normal.dim != anomaly.dim:
        raise ValueError(
            f"component dimensions differ: {normal.dim} vs {anomaly.dim}"
        )
    rng = make_rng(spec.seed)
    mask = rng.random(spec.n) < spec.epsilon
    n_anom = int(mask.sum())
    points = np.empty((spec.n, normal.dim))
    points[~mask] = normal.sample(rng, spec.n - n_anom)
    if n_anom:
        points[mask] = anomaly.sample(rng, n_anom)
    return LabeledDataset(Dataset(points), mask.astype(np.int64))


# ---------------------------------------------------------------------------
# Synthetic scenarios
# ---------------------------------------------------------------------------


def _ring(rng, n_normals=100, n_anomalies=2, radius=1.0, jitter=0.0,
          center=(0.0, 0.0)):
    # Equally spaced angles: with jitter == 0 every ring point has identical
    # local geometry, which symmetry-based tests rely on.
    if radius <= 0:
        raise ValueError("ring radius must be positive")
    center = np.asarray(center, dtype=float)
    angles = 2.0 * np.pi * np.arange(n_normals) / n_normals
    radii = np.full(n_normals, float(radius))
    if jitter:
        radii += jitter * rng.uniform(-1.0, 1.0, n_normals)
    normals = center + radii[:, None] * np.c_[np.cos(angles), np.sin(angles)]
    anomalies = np.tile(center, (n_anomalies, 1))
    return normals, anomalies


def _local(rng, n_dense=100, n_sparse=100, dense_center=(0.0, 0.0),
           sparse_center=(10.0, 0.0), dense_std=0.1, sparse_std=2.0,
           n_anomalies=2, anomaly_offset=0.7):
    dense = rng.normal(np.asarray(dense_center, float), dense_std, (n_dense, 2))
    sparse = rng.normal(np.asarray(sparse_center, float), sparse_std, (n_sparse, 2))
    theta = rng.uniform(0.0, 2.0 * np.pi, n_anomalies)
    anomalies = np.asarray(dense_center, float) + anomaly_offset * np.c_[
        np.cos(theta), np.sin(theta)
    ]
    return np.vstack([dense, sparse]), anomalies


def _clustered(rng, n_normals=300, n_anomalies=5, normal_std=1.0,
               center=(0.0, 0.0), eta=4.0, cluster_std=0.1):
    if eta < 0:
        raise ValueError("eta must be >= 0")
    center = np.asarray(center, float)
    normals = rng.normal(center, normal_std, (n_normals, 2))
    theta = rng.uniform(0.0, 2.0 * np.pi)
    offset = eta * np.array([np.cos(theta), np.sin(theta)])
    anomalies = rng.normal(center + offset, cluster_std, (n_anomalies, 2))
    return normals, anomalies


def _shrinking_separation(rng, n_normals=200, n_anomalies=5, eta=6.0,
                          cluster_std=0.25):
    if eta < 0:
        raise ValueError("eta must be >= 0")
    normals = rng.standard_normal((n_normals, 2))
    theta = rng.uniform(0.0, 2.0 * np.pi)
    offset = eta * np.array([np.cos(theta), np.sin(theta)])
    anomalies = rng.normal(offset, cluster_std, (n_anomalies, 2))
    return normals, anomalies


_SCENARIOS = {
    "ring": _ring,
    "local": _local,
    "clustered": _clustered,
    "shrinking_separation": _shrinking_separation,
}


def generate_scenario(name: str, params: Mapping | None = None,
                      seed: int = 0) -> LabeledDataset:
    """Build one of the stock 2-D scenarios.

    ring
        Normals equally spaced on a circle (optional radial jitter),
        anomalies exactly at the center.
    local
        A tight cluster plus a diffuse cluster; anomalies planted at a fixed
        offset from the tight cluster's center, so they are only *locally*
        far from their surroundings.
    clustered
        A normal blob plus a small tight anomaly cluster whose center sits
        at distance ``eta`` from the blob center (``eta=0`` is allowed and
        plants the cluster inside the blob).
    shrinking_separation
        A standard-normal blob plus a small anomaly cluster at configurable
        distance ``eta``; sweeping eta downward makes the problem harder.

    Anomaly counts may be zero; normal counts must be positive.
    """
    if name not in _SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; valid: {sorted(_SCENARIOS)}")
    params = dict(params or {})
    for key in ("n_normals", "n_dense", "n_sparse"):
        if key in params and params[key] < 1:
            raise ValueError(f"{key} must be positive, got {params[key]}")
    if params.get("n_anomalies", 0) < 0:
        raise ValueError("n_anomalies must be >= 0")
    rng = make_rng(seed)
    try:
        normals, anomalies = _SCENARIOS[name](rng, **params)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for scenario {name!r}: {exc}") from exc
    points = np.vstack([normals, anomalies])
    labels = np.r_[np.zeros(len(normals), dtype=np.int64),
                   np.ones(len(anomalies), dtype=np.int64)]
    return LabeledDataset(Dataset(points), labels)


# ---------------------------------------------------------------------------
# CSV in / out
# ---------------------------------------------------------------------------


def load_csv(path, label_column: str | int | None = None) -> LabeledDataset:
    """Load a comma-separated dataset (optional header, UTF-8, decimal point).

    ``label_column`` selects the 0/1 label column by header name or by
    0-based position; without it every point is labeled normal. Lines
    starting with '#' are treated as metadata and skipped. Parse failures
    report the 1-based physical line number.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [
            (lineno, row)
            for lineno, row in enumerate(csv.reader(fh), start=1)
            if row and not row[0].lstrip().startswith(COMMENT_PREFIX)
            and any(cell.strip() for cell in row)
        ]
    if not rows:
        raise CsvFormatError(f"{path}: empty file (no data rows)")

    def _try_floats(row):
        try:
            return [float(cell) for cell in row]
        except ValueError:
            return None

    header = None
    first_ln, first_row = rows[0]
    if _try_floats(first_row) is None:
        header = [cell.strip() for cell in first_row]
        rows = rows[1:]
        if not rows:
            raise CsvFormatError(f"{path}: empty file (header only)")

    width = len(rows[0][1])
    if label_column is None:
        label_idx = None
    elif isinstance(label_column, int):
        label_idx = label_column
        if not 0 <= label_idx < width:
            raise ValueError(
                f"label column index {label_idx} out of range for {width} columns"
            )
    else:
        if header is None:
            raise ValueError(
                f"label column {label_column!r} requested but file has no header"
            )
        if label_column not in header:
            raise ValueError(
                f"label column {label_column!r} not found; header: {header}"
            )
        label_idx = header.index(label_column)

    points, labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise CsvFormatError(
                f"{path}: row {lineno}: expected {width} cells, got {len(row)}"
            )
        values = []
        for col, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {lineno}: cell {col + 1} is not numeric: {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise CsvFormatError(
                    f"{path}: row {lineno}: non-finite value {cell!r}"
                )
            values.append(v)
        if label_idx is not None:
            lab = values.pop(label_idx)
            if lab not in (0.0, 1.0):
                raise CsvFormatError(
                    f"{path}: row {lineno}: label must be 0 or 1, got {lab}"
                )
            labels.append(int(lab))
        points.append(values)

    dataset = Dataset(np.asarray(points, dtype=float))
    if label_idx is None:
        return LabeledDataset.all_normal(dataset)
    return LabeledDataset(dataset, np.asarray(labels, dtype=np.int64))


def save_csv(labeled: LabeledDataset, path, include_labels: bool = True,
             metadata: Mapping | None = None) -> None:
    """Write points (and a trailing label column) in the same format load_csv reads."""
    path = Path(path)
    d = labeled.d
    names = [f"x{i}" for i in range(d)] + (["label"] if include_labels else [])
    with path.open("w", newline="", encoding="utf-8") as fh:
        if metadata is not None:
            fh.write(f"{COMMENT_PREFIX} {json.dumps(dict(metadata), sort_keys=True)}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(labeled.n):
            row = [repr(float(v)) for v in labeled.points[i]]
            if include_labels:
                row.append(str(int(labeled.labels[i])))
            writer.writerow(row)
