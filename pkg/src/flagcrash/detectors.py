"""Unsupervised anomaly scores over feature-vector series.

Both detectors are transductive: scores are computed in-sample over the
whole series, matching the percentile-over-observed-distribution protocol
used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError

RIDGE_EPS = 1e-6
LRD_EPS = 1e-10  # keeps densities finite around duplicate points


@dataclass
class AnomalySeries:
    dates: list[date]
    scores: np.ndarray  # higher = more anomalous
    method_tag: str

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.dates) != len(self.scores):
            raise DataError("AnomalySeries dates/scores length mismatch")
        if not np.isfinite(self.scores).all():
            raise DataError("AnomalySeries scores must be finite")


def mahalanobis_scores(
    dates: list[date], vectors: np.ndarray, method_tag: str = "mahalanobis"
) -> AnomalySeries:
    """Covariance-normalized distance of each row to the sample mean.

    The sample covariance gets a trace-scaled ridge, eps * (trace/d) * I
    with eps = 1e-6, so near-singular feature sets (flattened correlation
    matrices) stay well-defined.  A zero-trace covariance (all rows equal)
    scores everything 0.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {x.shape}")
    t_rows, dim = x.shape
    if dim == 0:
        raise DataError("feature dimension is zero")
    if t_rows < 2:
        raise DataError("need at least 2 vectors")
    if len(dates) != t_rows:
        raise DataError("dates/vectors length mismatch")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / (t_rows - 1)
    trace = float(np.trace(cov))
    if trace == 0.0:
        scores = np.zeros(t_rows)
    else:
        ridged = cov + (RIDGE_EPS * trace / dim) * np.eye(dim)
        solved = np.linalg.solve(ridged, centered.T)  # (d, T)
        scores = np.sqrt(np.einsum("td,dt->t", centered, solved))
    return AnomalySeries(dates=list(dates), scores=scores, method_tag=method_tag)


def lof_scores(
    dates: list[date], vectors: np.ndarray, k: int, method_tag: str | None = None
) -> AnomalySeries:
    """Classical local outlier factor with tie-inclusive neighborhoods.

    The k-neighborhood contains every point at distance <= the k-th
    nearest distance, so it may exceed k under ties.  Local reachability
    densities carry a 1e-10 additive floor, which makes exact duplicate
    clusters score exactly 1.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"expected a 2-d matrix, got shape {x.shape}")
    t_rows = x.shape[0]
    if t_rows < 2:
        raise DataError("need at least 2 vectors")
    if not 1 <= k < t_rows:
        raise DataError(f"neighbor count k={k} out of range [1, {t_rows - 1}]")
    if len(dates) != t_rows:
        raise DataError("dates/vectors length mismatch")

    # direct differences: the gram-expansion shortcut loses precision on
    # near-duplicate rows, which blows up reachability ratios
    dist = cdist(x, x, metric="euclidean")
    np.fill_diagonal(dist, np.inf)

    kdist = np.partition(dist, k - 1, axis=1)[:, k - 1]
    neighbor_mask = dist <= kdist[:, None]  # excludes self via inf diagonal
    counts = neighbor_mask.sum(axis=1)

    reach = np.maximum(kdist[None, :], dist)  # reach[a, b] = reach dist of b from a
    mean_reach = np.where(neighbor_mask, reach, 0.0).sum(axis=1) / counts
    lrd = 1.0 / (mean_reach + LRD_EPS)
    lof = np.where(neighbor_mask, lrd[None, :], 0.0).sum(axis=1) / counts / lrd
    return AnomalySeries(
        dates=list(dates), scores=lof, method_tag=method_tag or f"lof-k{k}"
    )
