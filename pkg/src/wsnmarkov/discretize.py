"""Quantile binning of continuous readings into discrete Markov states.

Bin edges are empirical quantiles at ``i/k`` for ``i = 1..k-1`` using the
linear-interpolation definition (Hyndman & Fan type 7, numpy's default):
for sorted samples ``x[0..n-1]`` and level ``q``,

    h = (n - 1) * q
    Q(q) = x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)])

A value's state is the number of edges strictly less than it, so values at
or below the first edge land in state 0, values above the last edge land in
state ``k - 1`` and tied edges collapse the bins between them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import FitError, StateDomainError
from .ingestion import NodeSeries

DEFAULT_STATES = 5


@dataclass(frozen=True)
class QuantileBinner:
    k: int
    edges: tuple[float, ...]
    fit_count: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise FitError("k must be at least 1")
        edges = tuple(float(e) for e in self.edges)
        if len(edges) != self.k - 1:
            raise FitError(f"expected {self.k - 1} edges for k={self.k}, got {len(edges)}")
        if any(b < a for a, b in zip(edges, edges[1:])):
            raise FitError("edges must be non-decreasing")
        if not all(np.isfinite(edges)):
            raise FitError("edges must be finite")
        object.__setattr__(self, "edges", edges)

    def assign(self, values) -> np.ndarray:
        """Vectorized :func:`assign_state`."""
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise StateDomainError("cannot assign a state to a non-finite value")
        return np.searchsorted(np.asarray(self.edges), values, side="left").astype(np.int64)

    def to_dict(self) -> dict:
        return {"k": self.k, "edges": list(self.edges), "fit_count": self.fit_count}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileBinner":
        return cls(int(d["k"]), tuple(d["edges"]), int(d.get("fit_count", 0)))


def fit_bins(values: Sequence[float], k: int = DEFAULT_STATES) -> QuantileBinner:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise FitError("cannot fit bins on an empty sample")
    if k < 1:
        raise FitError("k must be at least 1")
    if not np.all(np.isfinite(values)):
        raise FitError("training values must be finite")
    levels = np.arange(1, k) / k
    edges = np.quantile(values, levels, method="linear") if k > 1 else []
    return QuantileBinner(k, tuple(edges), int(values.size))


def assign_state(binner: QuantileBinner, value: float) -> int:
    return int(binner.assign([value])[0])


def encode_series(binner: QuantileBinner, series: NodeSeries) -> list[np.ndarray]:
    """Map a series to state segments, breaking wherever a bucket is missing."""
    if len(series) == 0:
        return []
    states = binner.assign(series.values)
    breaks = np.flatnonzero(np.diff(series.bucket_index) > 1) + 1
    return [seg for seg in np.split(states, breaks)]
