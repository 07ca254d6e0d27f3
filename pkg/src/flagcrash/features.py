"""Flattened correlation matrices and PCA dimensionality reduction."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .corrnet import CorrelationMatrix
from .errors import DataError


@dataclass
class FeatureVector:
    as_of_date: date
    values: np.ndarray


@dataclass
class PcaModel:
    """Top principal components of a centered data matrix.

    `components` rows are orthonormal; `explained_variance` is the
    per-component variance (squared singular values over T-1),
    nonincreasing.
    """

    mean: np.ndarray  # (D,)
    components: np.ndarray  # (d, D)
    explained_variance: np.ndarray  # (d,)


def flatten(c: CorrelationMatrix) -> FeatureVector:
    """Row-major N*N vector of the matrix, keeping its date."""
    return FeatureVector(as_of_date=c.as_of_date, values=c.values.reshape(-1).copy())


def fit_pca(data: np.ndarray, d: int) -> PcaModel:
    """SVD of the centered data matrix; deterministic sign convention.

    Each component's largest-magnitude entry is made positive, so fitted
    models are reproducible across runs and platforms.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DataError(f"fit_pca expects a 2-d matrix, got shape {data.shape}")
    t_rows, dim = data.shape
    if t_rows < 2:
        raise DataError(f"fit_pca needs at least 2 rows, got {t_rows}")
    if not 1 <= d <= min(t_rows, dim):
        raise DataError(
            f"target dimension {d} out of range [1, {min(t_rows, dim)}]"
        )
    mean = data.mean(axis=0)
    centered = data - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:d].copy()
    for row in components:
        peak = np.argmax(np.abs(row))
        if row[peak] < 0:
            row *= -1.0
    explained = (s[:d] ** 2) / (t_rows - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def project(model: PcaModel, v: FeatureVector) -> FeatureVector:
    """components @ (v - mean), preserving the date."""
    if v.values.shape[0] != model.mean.shape[0]:
        raise DataError(
            f"cannot project a {v.values.shape[0]}-vector with a "
            f"{model.mean.shape[0]}-dimensional model"
        )
    return FeatureVector(
        as_of_date=v.as_of_date, values=model.components @ (v.values - model.mean)
    )


def project_matrix(model: PcaModel, data: np.ndarray) -> np.ndarray:
    if data.shape[1] != model.mean.shape[0]:
        raise DataError("projection dimension mismatch")
    return (data - model.mean) @ model.components.T


def reconstruct(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    return projected @ model.components + model.mean
