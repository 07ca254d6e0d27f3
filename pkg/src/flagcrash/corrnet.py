"""Per-window correlation matrices and their weighted digraphs.

Two correlation kinds are supported: plain Pearson on the windowed return
slices, and cross-map skill from delay embeddings (the nonlinear coupling
measure).  Negative entries are clipped to zero before graph construction,
and the diagonal is always zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import DataError
from .ingest import ReturnMatrix

DEFAULT_WINDOW = 25


@dataclass(frozen=True)
class WindowSpec:
    """Contiguous block of return rows: [start_index, start_index + width)."""

    start_index: int
    width: int = DEFAULT_WINDOW

    def validate(self, n_rows: int) -> None:
        if self.width < 3:
            raise DataError(f"window width must be >= 3, got {self.width}")
        if self.start_index < 0 or self.start_index + self.width > n_rows:
            raise DataError(
                f"window [{self.start_index}, {self.start_index + self.width}) "
                f"out of range for {n_rows} return rows"
            )


@dataclass(frozen=True)
class CcmParams:
    """Delay-embedding parameters for the cross-map correlation."""

    embedding_dim: int = 2
    lag: int = 1

    def validate(self, width: int) -> None:
        if self.embedding_dim < 2:
            raise DataError(f"embedding dim must be >= 2, got {self.embedding_dim}")
        if self.lag < 1:
            raise DataError(f"lag must be >= 1, got {self.lag}")
        n_shadow = width - (self.embedding_dim - 1) * self.lag
        if n_shadow < self.embedding_dim + 2:
            raise DataError(
                f"window of width {width} too short for embedding "
                f"(E={self.embedding_dim}, tau={self.lag}): "
                f"{n_shadow} shadow points, need {self.embedding_dim + 2}"
            )


@dataclass
class CorrelationMatrix:
    values: np.ndarray  # (N, N)
    window: WindowSpec
    as_of_date: date
    kind: str  # "pearson" | "ccm"


@dataclass
class WeightedDigraph:
    """Directed graph with weights in (0, 1]; zero entries are absent edges."""

    n_vertices: int
    edges: list[tuple[int, int, float]] = field(default_factory=list)
    as_of_date: date | None = None


def _window_slice(returns: ReturnMatrix, window: WindowSpec) -> tuple[np.ndarray, date]:
    window.validate(returns.returns.shape[0])
    lo, hi = window.start_index, window.start_index + window.width
    return returns.returns[lo:hi], returns.dates[hi - 1]


def pearson_corr(returns: ReturnMatrix, window: WindowSpec) -> CorrelationMatrix:
    """Sample Pearson correlation of each pair of windowed return slices.

    Zero-variance slices correlate 0 with everything; the diagonal is 0.
    """
    block, as_of = _window_slice(returns, window)
    centered = block - block.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit
    corr = np.clip(corr, -1.0, 1.0)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.fill_diagonal(corr, 0.0)
    return CorrelationMatrix(values=corr, window=window, as_of_date=as_of, kind="pearson")


def _shadow_points(x: np.ndarray, e_dim: int, tau: int) -> np.ndarray:
    """Delay embedding: row k is (x[k], x[k-tau], ..., x[k-(E-1)tau])."""
    w = x.shape[0]
    first = (e_dim - 1) * tau
    idx = np.arange(first, w)
    cols = [x[idx - j * tau] for j in range(e_dim)]
    return np.stack(cols, axis=1)


def _neighbor_weights(shadow: np.ndarray, n_neighbors: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-neighbor indices and exponential simplex weights per point.

    Self-matches are excluded.  When the nearest distance is zero the
    weight collapses uniformly onto the zero-distance neighbors.
    """
    m = shadow.shape[0]
    diff = shadow[:, None, :] - shadow[None, :, :]
    dists = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")[:, :n_neighbors]
    d = np.take_along_axis(dists, order, axis=1)
    d1 = d[:, 0]
    weights = np.empty_like(d)
    zero_first = d1 == 0.0
    if zero_first.any():
        zmask = d[zero_first] == 0.0
        weights[zero_first] = zmask / zmask.sum(axis=1, keepdims=True)
    reg = ~zero_first
    if reg.any():
        u = np.exp(-d[reg] / d1[reg, None])
        weights[reg] = u / u.sum(axis=1, keepdims=True)
    assert weights.shape == (m, n_neighbors)
    return order, weights


def _pearson_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Pearson correlation of two equal-shape matrices."""
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    num = (ac * bc).sum(axis=0)
    den = np.sqrt((ac**2).sum(axis=0) * (bc**2).sum(axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r[~np.isfinite(r)] = 0.0
    return np.clip(r, -1.0, 1.0)


def ccm_corr(
    returns: ReturnMatrix, window: WindowSpec, params: CcmParams = CcmParams()
) -> CorrelationMatrix:
    """Cross-map skill matrix: values[i][j] reconstructs series j from the
    delay embedding of series i.

    For each shadow point of series i, the E+1 nearest shadow neighbors
    (excluding itself) vote with exponentially decaying weights; the skill
    is the Pearson correlation between those cross-map estimates of series
    j and series j itself.  Non-finite skills clamp to 0.
    """
    block, as_of = _window_slice(returns, window)
    params.validate(window.width)
    n = block.shape[1]
    e_dim, tau = params.embedding_dim, params.lag
    first = (e_dim - 1) * tau
    targets = block[first:, :]  # y values aligned with shadow rows
    values = np.zeros((n, n))
    for i in range(n):
        shadow = _shadow_points(block[:, i], e_dim, tau)
        order, weights = _neighbor_weights(shadow, e_dim + 1)
        # predictions for every candidate target series at once: (m, N)
        preds = np.einsum("kl,klj->kj", weights, targets[order])
        values[i, :] = _pearson_columns(preds, targets)
    np.fill_diagonal(values, 0.0)
    return CorrelationMatrix(values=values, window=window, as_of_date=as_of, kind="ccm")


def threshold_nonnegative(c: CorrelationMatrix) -> CorrelationMatrix:
    """Replace negative entries with zero; kind and window are preserved."""
    return CorrelationMatrix(
        values=np.maximum(c.values, 0.0),
        window=c.window,
        as_of_date=c.as_of_date,
        kind=c.kind,
    )


def to_digraph(c: CorrelationMatrix) -> WeightedDigraph:
    """Thresholded matrix -> weighted digraph.

    A symmetric (pearson) matrix yields one canonical edge i->j with i<j
    per unordered pair; a cross-map matrix keeps both directions.
    """
    vals = c.values
    if (vals < 0.0).any():
        raise DataError("to_digraph requires a thresholded matrix (no negatives)")
    n = vals.shape[0]
    edges: list[tuple[int, int, float]] = []
    if c.kind == "pearson":
        for i in range(n):
            for j in range(i + 1, n):
                w = vals[i, j]
                if w > 0.0:
                    edges.append((i, j, float(w)))
    else:
        for i in range(n):
            for j in range(n):
                if i != j and vals[i, j] > 0.0:
                    edges.append((i, j, float(vals[i, j])))
    return WeightedDigraph(n_vertices=n, edges=edges, as_of_date=c.as_of_date)


def window_specs(n_rows: int, width: int) -> list[WindowSpec]:
    """All stride-1 windows over `n_rows` return rows."""
    if n_rows < width:
        raise DataError(f"{n_rows} return rows cannot hold a window of width {width}")
    return [WindowSpec(s, width) for s in range(n_rows - width + 1)]


def correlation_series(
    returns: ReturnMatrix,
    width: int = DEFAULT_WINDOW,
    kind: str = "ccm",
    ccm_params: CcmParams = CcmParams(),
    jobs: int = 1,
) -> list[CorrelationMatrix]:
    """Thresholded correlation matrix of every sliding window."""
    if kind not in ("pearson", "ccm"):
        raise DataError(f"unknown correlation kind {kind!r}")
    specs = window_specs(returns.returns.shape[0], width)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        fn = partial(_one_window, returns, kind, ccm_params)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, specs, chunksize=32))
    return [_one_window(returns, kind, ccm_params, spec) for spec in specs]


def _one_window(
    returns: ReturnMatrix, kind: str, ccm_params: CcmParams, spec: WindowSpec
) -> CorrelationMatrix:
    if kind == "pearson":
        c = pearson_corr(returns, spec)
    else:
        c = ccm_corr(returns, spec, ccm_params)
    return threshold_nonnegative(c)


def graph_series(matrices: list[CorrelationMatrix]) -> list[WeightedDigraph]:
    return [to_digraph(c) for c in matrices]


def matrix_from_digraph(g: WeightedDigraph, kind: str) -> np.ndarray:
    """Rebuild the thresholded correlation matrix a digraph was built from."""
    vals = np.zeros((g.n_vertices, g.n_vertices))
    for s, t, w in g.edges:
        vals[s, t] = w
        if kind == "pearson":
            vals[t, s] = w
    return vals
