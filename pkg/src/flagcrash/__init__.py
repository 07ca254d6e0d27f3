"""Sliding-window correlation graphs from stock prices, plus topological,
PCA, and graph-neural-network anomaly scores with event-based evaluation."""

__version__ = "0.1.0"
