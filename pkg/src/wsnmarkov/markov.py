"""First-order transition matrix estimation and low-probability detection.

A :class:`TransitionMatrix` is estimated from state segments by counting
adjacent pairs and normalizing rows. :func:`detect` slides a window of
``window_size`` states over every segment and flags windows whose
log-likelihood falls strictly below a threshold. With the default settings
(two-state windows, threshold ``log(theta)``) a window is one transition
and it is flagged exactly when its probability is below ``theta``.

Likelihoods are accumulated in log space. Probabilities below ``p_floor``
(notably exact zeros) contribute ``log(p_floor)`` so scores stay finite.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .discretize import QuantileBinner
from .exceptions import DataError, EstimationError, ModelFileError, StateDomainError

MODEL_VERSION = 1
ROW_SUM_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic transition probabilities, optionally with their counts.

    ``probs[i, j]`` estimates P(next = j | current = i). Rows listed in
    ``unobserved_rows`` had no outgoing transitions in training: they are all
    zero without smoothing and uniform with ``smoothing_alpha > 0``. A matrix
    built with :meth:`from_probs` (e.g. a known ground truth) has
    ``counts=None``.
    """

    k: int
    probs: np.ndarray
    counts: np.ndarray | None = None
    smoothing_alpha: float = 0.0
    unobserved_rows: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.k, self.k):
            raise StateDomainError(f"probs must be {self.k}x{self.k}, got {probs.shape}")
        object.__setattr__(self, "probs", _frozen(probs))
        if self.counts is not None:
            object.__setattr__(self, "counts", _frozen(np.asarray(self.counts, dtype=np.int64)))
        object.__setattr__(self, "unobserved_rows", frozenset(int(i) for i in self.unobserved_rows))

    @classmethod
    def from_counts(cls, counts, smoothing_alpha: float = 0.0) -> "TransitionMatrix":
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise StateDomainError("counts must be a square matrix")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise StateDomainError("counts must be non-negative integers")
        if smoothing_alpha < 0:
            raise ValueError("smoothing_alpha must be non-negative")
        counts = counts.astype(np.int64)
        k = counts.shape[0]
        totals = counts.sum(axis=1)
        smoothed = counts + float(smoothing_alpha)
        row = smoothed.sum(axis=1, keepdims=True)
        probs = np.divide(smoothed, row, out=np.zeros((k, k)), where=row > 0)
        unobserved = np.flatnonzero(totals == 0)
        return cls(k, probs, counts, float(smoothing_alpha), frozenset(unobserved.tolist()))

    @classmethod
    def from_probs(cls, probs) -> "TransitionMatrix":
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise StateDomainError("probs must be a square matrix")
        if np.any(probs < 0) or np.any(probs > 1):
            raise StateDomainError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=1)
        zero = sums == 0
        if np.any(np.abs(sums[~zero] - 1.0) > ROW_SUM_TOL):
            raise StateDomainError("every non-empty row must sum to 1")
        return cls(probs.shape[0], probs, None, 0.0, frozenset(np.flatnonzero(zero).tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        same_counts = (self.counts is None) == (other.counts is None) and (
            self.counts is None or np.array_equal(self.counts, other.counts))
        return (self.k == other.k and np.array_equal(self.probs, other.probs) and same_counts
                and self.smoothing_alpha == other.smoothing_alpha
                and self.unobserved_rows == other.unobserved_rows)

    def format_table(self, digits: int = 2) -> str:
        """Render as an aligned From/To table with S1..Sk labels."""
        labels = [f"S{i + 1}" for i in range(self.k)]
        width = max(digits + 2, max(len(s) for s in labels), len("From / To"))
        head = "From / To".ljust(width) + "".join(s.rjust(width + 2) for s in labels)
        lines = [head]
        for i, lab in enumerate(labels):
            cells = "".join(f"{p:.{digits}f}".rjust(width + 2) for p in self.probs[i])
            lines.append(lab.ljust(width) + cells)
        return "\n".join(lines)


def _check_states(seq: np.ndarray, k: int) -> None:
    if seq.size and (seq.min() < 0 or seq.max() >= k):
        raise StateDomainError(f"state index outside 0..{k - 1}")


def build_transition_matrix(
    segments: Iterable[Sequence[int]], k: int, smoothing_alpha: float = 0.0
) -> TransitionMatrix:
    """Count adjacent pairs inside each segment and row-normalize.

    Pairs never span two segments. Raises :class:`EstimationError` if no
    segment has at least two states.
    """
    counts = np.zeros((k, k), dtype=np.int64)
    n_pairs = 0
    for seg in segments:
        seg = np.asarray(seg, dtype=np.int64)
        _check_states(seg, k)
        if seg.size < 2:
            continue
        np.add.at(counts, (seg[:-1], seg[1:]), 1)
        n_pairs += seg.size - 1
    if n_pairs == 0:
        raise EstimationError("need at least one segment with two or more states")
    return TransitionMatrix.from_counts(counts, smoothing_alpha)


@dataclass(frozen=True)
class DetectorConfig:
    theta: float = 0.05
    window_size: int = 2
    epsilon: float | None = None
    p_floor: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.window_size < 2:
            raise ValueError("window_size must be at least 2")
        if not self.p_floor > 0:
            raise ValueError("p_floor must be positive")

    @property
    def log_threshold(self) -> float:
        """Window threshold; defaults to ``(window_size - 1) * log(theta)``."""
        if self.epsilon is not None:
            return float(self.epsilon)
        if self.theta == 0:
            return -math.inf
        return (self.window_size - 1) * math.log(self.theta)

    @property
    def per_transition(self) -> bool:
        return self.window_size == 2 and self.epsilon is None


@dataclass(frozen=True)
class AnomalyFlag:
    segment: int
    position: int
    score: float
    is_anomaly: bool
    transition: tuple[int, int] | None = None


@dataclass
class DetectionReport:
    """Verdict for every window, plus the segments too short to score."""

    flags: list[AnomalyFlag] = field(default_factory=list)
    skipped_segments: list[int] = field(default_factory=list)

    def __iter__(self):
        return iter(self.flags)

    def __len__(self) -> int:
        return len(self.flags)

    @property
    def anomalies(self) -> list[AnomalyFlag]:
        return [f for f in self.flags if f.is_anomaly]

    @property
    def n_windows(self) -> int:
        return len(self.flags)

    @property
    def n_anomalies(self) -> int:
        return sum(f.is_anomaly for f in self.flags)


def _pair_probs(seq: np.ndarray, tpm: TransitionMatrix) -> np.ndarray:
    return tpm.probs[seq[:-1], seq[1:]]


def calculate_likelihood(window: Sequence[int], tpm: TransitionMatrix, p_floor: float = 1e-12) -> float:
    """Sum of ``log(max(P[a, b], p_floor))`` over consecutive pairs of ``window``."""
    w = np.asarray(window, dtype=np.int64)
    if w.size < 2:
        raise StateDomainError("a window needs at least two states")
    _check_states(w, tpm.k)
    return float(np.log(np.maximum(_pair_probs(w, tpm), p_floor)).sum())


def detect(segments: Sequence[Sequence[int]], tpm: TransitionMatrix,
           config: DetectorConfig = DetectorConfig()) -> DetectionReport:
    """Score every stride-1 window of every segment.

    In per-transition mode (``window_size == 2`` and no explicit
    ``epsilon``) a window is flagged iff its raw probability is ``< theta``;
    otherwise iff its floored log-likelihood is ``< config.log_threshold``.
    Segments shorter than the window are listed in ``skipped_segments``.
    """
    report = DetectionReport()
    W = config.window_size
    threshold = config.log_threshold
    for s, seg in enumerate(segments):
        seg = np.asarray(seg, dtype=np.int64)
        _check_states(seg, tpm.k)
        if seg.size < W:
            report.skipped_segments.append(s)
            continue
        p = _pair_probs(seg, tpm)
        logs = np.log(np.maximum(p, config.p_floor))
        scores = sliding_window_view(logs, W - 1).sum(axis=1)
        if config.per_transition:
            hits = p < config.theta
        else:
            hits = scores < threshold
        for t in range(scores.size):
            trans = (int(seg[t]), int(seg[t + 1])) if W == 2 else None
            report.flags.append(AnomalyFlag(s, t, float(scores[t]), bool(hits[t]), trans))
    return report


# -- model file ---------------------------------------------------------------

@dataclass(frozen=True)
class Model:
    binner: QuantileBinner | None
    tpm: TransitionMatrix
    config: DetectorConfig = DetectorConfig()
    feature: str = "temperature"
    trained_on: dict = field(default_factory=dict)


def model_to_dict(model: Model) -> dict:
    tpm, cfg = model.tpm, model.config
    binner = model.binner
    return {
        "version": MODEL_VERSION,
        "feature": model.feature,
        "k": tpm.k,
        "edges": list(binner.edges) if binner else None,
        "fit_count": binner.fit_count if binner else 0,
        "smoothing_alpha": tpm.smoothing_alpha,
        "counts": tpm.counts.tolist() if tpm.counts is not None else None,
        "probs": tpm.probs.tolist(),
        "theta": cfg.theta,
        "window_size": cfg.window_size,
        "epsilon": cfg.epsilon,
        "p_floor": cfg.p_floor,
        "trained_on": dict(model.trained_on),
    }


def save_model(model: Model, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


_REQUIRED = ("version", "feature", "k", "edges", "smoothing_alpha", "counts",
             "theta", "window_size", "p_floor", "trained_on")


def model_from_dict(d: dict) -> Model:
    missing = [key for key in _REQUIRED if key not in d]
    if missing:
        raise ModelFileError(f"model file lacks keys: {missing}")
    if d["version"] != MODEL_VERSION:
        raise ModelFileError(f"unsupported model version {d['version']!r}")
    k = d["k"]
    if not isinstance(k, int) or k < 1:
        raise ModelFileError("k must be a positive integer")
    try:
        binner = None
        if d["edges"] is not None:
            if len(d["edges"]) != k - 1:
                raise ModelFileError(f"k={k} needs {k - 1} edges, file has {len(d['edges'])}")
            binner = QuantileBinner(k, tuple(d["edges"]), int(d.get("fit_count", 0)))

        stored = None if d.get("probs") is None else np.asarray(d["probs"], dtype=float)
        if stored is not None and stored.shape != (k, k):
            raise ModelFileError(f"probs must be {k}x{k}")
        if d["counts"] is not None:
            counts = np.asarray(d["counts"])
            if counts.shape != (k, k):
                raise ModelFileError(f"counts must be {k}x{k}")
            tpm = TransitionMatrix.from_counts(counts, float(d["smoothing_alpha"]))
            if stored is not None:
                _check_stochastic(stored, tpm.unobserved_rows if tpm.smoothing_alpha == 0 else ())
                if np.max(np.abs(stored - tpm.probs)) > ROW_SUM_TOL:
                    raise ModelFileError("stored probs disagree with counts")
        else:
            if stored is None:
                raise ModelFileError("model needs counts or probs")
            _check_stochastic(stored, np.flatnonzero(stored.sum(axis=1) == 0))
            tpm = TransitionMatrix.from_probs(stored)
        config = DetectorConfig(float(d["theta"]), int(d["window_size"]),
                                None if d.get("epsilon") is None else float(d["epsilon"]),
                                float(d["p_floor"]))
    except ModelFileError:
        raise
    except (ValueError, TypeError) as exc:
        raise ModelFileError(str(exc)) from exc
    return Model(binner, tpm, config, d["feature"], dict(d["trained_on"] or {}))


def _check_stochastic(probs: np.ndarray, empty_rows) -> None:
    if np.any(probs < 0) or np.any(probs > 1):
        raise ModelFileError("probabilities must lie in [0, 1]")
    for i, row in enumerate(probs):
        if i in set(int(r) for r in empty_rows) and not row.any():
            continue
        if abs(row.sum() - 1.0) > ROW_SUM_TOL:
            raise ModelFileError(f"row {i} sums to {row.sum():.12g}, not 1")


def load_model(path: str | os.PathLike) -> Model:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise ModelFileError("model file must hold a JSON object")
    return model_from_dict(d)


# -- flags CSV ----------------------------------------------------------------

FLAGS_HEADER = ("segment", "position", "from_state", "to_state", "log_likelihood", "is_anomaly")


def write_flags_csv(flags: Iterable[AnomalyFlag], path: str | os.PathLike) -> None:
    """One row per scored window. ``from_state``/``to_state`` are blank unless
    the window is a single transition."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLAGS_HEADER)
        for f in flags:
            a, b = f.transition if f.transition else ("", "")
            w.writerow((f.segment, f.position, a, b, repr(f.score), int(f.is_anomaly)))


def read_flags_csv(path: str | os.PathLike) -> list[AnomalyFlag]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FLAGS_HEADER:
            raise DataError(f"{path}: expected header {','.join(FLAGS_HEADER)}")
        for row in reader:
            trans = None
            if row["from_state"] != "" and row["to_state"] != "":
                trans = (int(row["from_state"]), int(row["to_state"]))
            out.append(AnomalyFlag(int(row["segment"]), int(row["position"]),
                                   float(row["log_likelihood"]),
                                   row["is_anomaly"].strip() in ("1", "true", "True"), trans))
    return out
