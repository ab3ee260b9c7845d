"""Anomaly scorers: distance-to-measure family, kNN/kthNN, a ratio variant
and a classic LOF baseline.

Every scorer emits "higher = more anomalous" scores. The DTM family
includes a query point's own sample entry among its neighbors (the
empirical measure makes no exclusion); LOF follows its standard published
definition and excludes the point itself.

Scoring is stateless given an index, embarrassingly parallel across points,
and bit-identical regardless of the ``threads`` degree.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .data import Dataset, LabeledDataset
from .nnindex import NeighborIndex, build_index

METHODS = ("knn", "kthnn", "dtm", "dtmf", "lof")

DEFAULT_MASS = 0.03          # k = ceil(0.03 * n) unless the caller says otherwise
DEFAULT_DTM_ORDER = 2.0

RATIO_CAP = 1e12             # cap for ratios with a zero denominator
_LRD_EPS = 1e-12             # keeps local reachability densities finite on duplicates


@dataclass(frozen=True)
class DetectorConfig:
    """Method selection plus the neighbor-count rule.

    Exactly one of ``k`` (absolute neighbor count) or ``m`` (mass fraction,
    k = ceil(m*n)) may be given; with neither, k = ceil(0.03*n). ``q`` is
    the DTM order and only meaningful for method="dtm" (knn and kthnn are
    the q=1 and q=inf special cases).
    """

    method: str
    q: float | None = None
    k: int | None = None
    m: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; valid: {', '.join(METHODS)}"
            )
        if self.k is not None and self.m is not None:
            raise ValueError("supply at most one of k and m")
        if self.k is not None and self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.m is not None and not 0.0 < self.m < 1.0:
            raise ValueError(f"m must be in (0, 1), got {self.m}")
        if self.q is not None:
            if self.method != "dtm":
                raise ValueError(f"q is only valid for method='dtm', not {self.method!r}")
            if self.q != np.inf and self.q < 1:
                raise ValueError(f"q must be in [1, inf], got {self.q}")

    def resolve_k(self, n: int) -> int:
        if self.k is not None:
            k = self.k
        else:
            m = self.m if self.m is not None else DEFAULT_MASS
            k = max(1, math.ceil(m * n))
        if not 1 <= k <= n:
            raise ValueError(f"resolved k={k} out of range [1, {n}]")
        return k

    def resolve_q(self) -> float | None:
        if self.method == "knn":
            return 1.0
        if self.method == "kthnn":
            return np.inf
        if self.method == "dtm":
            return float(self.q) if self.q is not None else DEFAULT_DTM_ORDER
        return None


@dataclass(frozen=True)
class ScoreReport:
    """Per-point anomaly scores plus the resolved configuration."""

    scores: np.ndarray
    method: str
    k: int
    q: float | None
    n: int
    d: int

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.shape != (self.n,):
            raise ValueError(f"scores shape {scores.shape} != ({self.n},)")
        if not np.isfinite(scores).all() or (scores < 0).any():
            raise ValueError("scores must be finite and >= 0")
        frozen = scores.copy()
        frozen.flags.writeable = False
        object.__setattr__(self, "scores", frozen)

    def config_dict(self) -> dict:
        q = self.q
        if q is not None and math.isinf(q):
            q = "inf"
        return {"method": self.method, "k": self.k, "q": q,
                "n": self.n, "d": self.d}

    def write_csv(self, path, predicted=None, metadata: Mapping | None = None):
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            meta = dict(metadata or {})
            meta["detector"] = self.config_dict()
            fh.write(f"# {json.dumps(meta, sort_keys=True)}\n")
            writer = csv.writer(fh)
            cols = ["index", "score"] + (["predicted"] if predicted is not None else [])
            writer.writerow(cols)
            for i in range(self.n):
                row = [str(i), repr(float(self.scores[i]))]
                if predicted is not None:
                    row.append(str(int(predicted[i])))
                writer.writerow(row)

    def write_json(self, path, predicted=None, metadata: Mapping | None = None):
        payload = dict(metadata or {})
        payload["detector"] = self.config_dict()
        payload["scores"] = [float(s) for s in self.scores]
        if predicted is not None:
            payload["predicted"] = [int(p) for p in predicted]
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def dtm_score(index: NeighborIndex, x, k: int, q: float) -> float:
    """Empirical distance-to-measure of x at neighbor count k and order q.

    Finite q gives the q-power mean of the k nearest distances; q = inf
    gives the k-th nearest distance itself. Large q is evaluated with the
    maximum distance factored out, so it cannot overflow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(index.power_means(x[None, :], k, q)[0])


def dtm_scores(index: NeighborIndex, k: int, q: float, threads: int = 1) -> np.ndarray:
    """Empirical DTM at every sample point."""
    return index.power_means(index.dataset.points, k, q, workers=threads)


def dtmf2_raw(index: NeighborIndex, k: int, threads: int = 1) -> np.ndarray:
    """Mean over each point's k neighbors of neighborDTM2 / ownDTM2.

    Close to 1 where the order-2 DTM is locally flat, below 1 where a point
    sticks out of its neighborhood. Ratios with a zero denominator are 1
    when the numerator is also zero (duplicate clusters) and are capped at
    1e12 otherwise.
    """
    pts = index.dataset.points
    dtm2 = index.power_means(pts, k, 2.0, workers=threads)
    nbr_idx, _ = index.query_batch(pts, k, workers=threads)
    num = dtm2[nbr_idx]
    den = dtm2[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0),
                         np.where(num == 0.0, 1.0, RATIO_CAP))
    ratio = np.minimum(ratio, RATIO_CAP)
    return ratio.mean(axis=1)


def dtmf2_scores(index: NeighborIndex, k: int, threads: int = 1) -> np.ndarray:
    """Anomaly-oriented ratio score: reciprocal of :func:`dtmf2_raw`.

    The raw ratio is high for ordinary points, so the emitted score is its
    reciprocal (capped at 1e12) to keep the shared higher-is-more-anomalous
    contract. Any fixed monotone transform leaves ranking metrics unchanged.
    """
    raw = dtmf2_raw(index, k, threads)
    with np.errstate(divide="ignore"):
        score = np.where(raw > 0.0, 1.0 / np.where(raw > 0.0, raw, 1.0), RATIO_CAP)
    return np.minimum(score, RATIO_CAP)


def lof_scores(index: NeighborIndex, k: int, threads: int = 1) -> np.ndarray:
    """Classic local outlier factor with k neighbors (self excluded).

    reachability(i <- j) = max(kdist(j), d(i, j)); lrd = inverse mean
    reachability; LOF(i) = mean of neighbors' lrd over lrd(i). A tiny
    epsilon keeps lrd finite when all k neighbors coincide with the point.
    """
    n = index.n
    if n < 2:
        raise ValueError("LOF needs at least 2 points")
    if not 1 <= k <= n - 1:
        raise ValueError(f"LOF needs 1 <= k <= n-1, got k={k}, n={n}")
    pts = index.dataset.points
    idx, dist = index.query_batch(pts, k + 1, workers=threads)
    # Drop each row's own entry; if it was pushed out by >= k+1 coincident
    # lower-index duplicates, drop the farthest entry instead (the first k
    # are then exactly the k nearest other points).
    self_mask = idx == np.arange(n)[:, None]
    drop_col = np.where(self_mask.any(axis=1), self_mask.argmax(axis=1), k)
    keep = np.ones_like(idx, dtype=bool)
    keep[np.arange(n), drop_col] = False
    nbr = idx[keep].reshape(n, k)
    nbr_dist = dist[keep].reshape(n, k)

    kdist = nbr_dist[:, -1]
    reach = np.maximum(kdist[nbr], nbr_dist)
    lrd = 1.0 / (reach.mean(axis=1) + _LRD_EPS)
    return lrd[nbr].mean(axis=1) / lrd


def score_dataset(dataset: Dataset | LabeledDataset,
                  config: DetectorConfig,
                  threads: int = 1,
                  index: NeighborIndex | None = None) -> ScoreReport:
    """Score every point of a dataset with the configured detector."""
    if isinstance(dataset, LabeledDataset):
        dataset = dataset.dataset
    if index is None:
        index = build_index(dataset)
    k = config.resolve_k(dataset.n)
    q = config.resolve_q()
    if config.method in ("knn", "kthnn", "dtm"):
        scores = index.power_means(dataset.points, k, q, workers=threads)
    elif config.method == "dtmf":
        scores = dtmf2_scores(index, k, threads)
    else:
        scores = lof_scores(index, k, threads)
    return ScoreReport(scores=scores, method=config.method, k=k, q=q,
                       n=dataset.n, d=dataset.d)


def rank_anomalies(scores, top: int | None = None,
                   threshold: float | None = None) -> np.ndarray:
    """Predicted 0/1 labels from scores.

    top-count mode flags the ``top`` highest scores (score ties broken by
    smaller index first); threshold mode flags score > threshold.
    """
    if isinstance(scores, ScoreReport):
        scores = scores.scores
    scores = np.asarray(scores, dtype=float)
    n = scores.shape[0]
    if (top is None) == (threshold is None):
        raise ValueError("supply exactly one of top and threshold")
    pred = np.zeros(n, dtype=np.int64)
    if threshold is not None:
        pred[scores > threshold] = 1
        return pred
    if not 0 <= top <= n:
        raise ValueError(f"top must be in [0, {n}], got {top}")
    if top:
        order = np.lexsort((np.arange(n), -scores))
        pred[order[:top]] = 1
    return pred
