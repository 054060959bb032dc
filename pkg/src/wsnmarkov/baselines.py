"""Global Z-score thresholding, the simple statistical comparator.

Mean and population standard deviation are fitted once on training values;
a test value is anomalous when ``|x - mean| / std`` strictly exceeds the
threshold. A zero standard deviation flags nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import FitError
from .markov import AnomalyFlag


@dataclass(frozen=True)
class ZScoreDetector:
    mean: float
    std: float
    z_threshold: float = 3.0

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be non-negative")
        if not self.z_threshold > 0:
            raise ValueError("z_threshold must be positive")


def fit_zscore(values: Sequence[float], z_threshold: float = 3.0) -> ZScoreDetector:
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        raise FitError("Z-score fit needs at least two values")
    if not np.all(np.isfinite(values)):
        raise FitError("training values must be finite")
    return ZScoreDetector(float(values.mean()), float(values.std(ddof=0)), z_threshold)


def score_zscore(detector: ZScoreDetector, values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(|z|, is_anomaly)`` arrays, one entry per value."""
    values = np.asarray(values, dtype=float)
    if detector.std == 0:
        return np.zeros(values.shape), np.zeros(values.shape, dtype=bool)
    z = np.abs(values - detector.mean) / detector.std
    return z, z > detector.z_threshold


def zscore_flags(detector: ZScoreDetector, segments: Sequence[Sequence[float]],
                 align_to_transitions: bool = False) -> list[AnomalyFlag]:
    """Per-point Z-score verdicts in the flags-file layout.

    The ``score`` slot carries ``|z|``. With ``align_to_transitions`` a
    point at index ``p`` is reported at position ``p - 1`` (the transition
    entering it) and the first point of each segment is dropped, so the
    flags share a universe with two-state Markov windows.
    """
    out = []
    for s, seg in enumerate(segments):
        z, hit = score_zscore(detector, seg)
        start = 1 if align_to_transitions else 0
        for p in range(start, len(z)):
            out.append(AnomalyFlag(s, p - start, float(z[p]), bool(hit[p]), None))
    return out
