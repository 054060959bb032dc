"""End-to-end helpers: split, fit, detect per node, and the synthetic benchmark.

The command line tool is a thin layer over these functions, so a CLI run and
a direct library call on the same inputs give the same results.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from typing import Mapping, Sequence

import numpy as np

from .baselines import ZScoreDetector, fit_zscore, zscore_flags
from .discretize import encode_series, fit_bins
from .evaluation import LabelSet, MetricsReport, evaluate, node_anomaly_rates
from .exceptions import DataError, EmptySeriesError, FitError
from .ingestion import NodeSeries, SensorRecord, build_series
from .markov import (AnomalyFlag, DetectionReport, DetectorConfig, Model, TransitionMatrix,
                     build_transition_matrix, detect)
from .synthesis import (MOTE6_TPM, ZERO_PROB, ChainSpec, InjectionPlan, inject,
                        sample_chain)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Split:
    """Train/test split rule: a leading fraction, or two date ranges.

    Date ranges are half-open ``[start, end)``; missing bounds are open.
    """

    train_fraction: float | None = 0.7
    train_start: datetime | None = None
    train_end: datetime | None = None
    test_start: datetime | None = None
    test_end: datetime | None = None

    @property
    def by_date(self) -> bool:
        return any(x is not None for x in (self.train_start, self.train_end,
                                           self.test_start, self.test_end))

    def validate(self) -> None:
        if self.by_date:
            lo = max(self.train_start or datetime.min, self.test_start or datetime.min)
            hi = min(self.train_end or datetime.max, self.test_end or datetime.max)
            if lo < hi:
                raise ValueError("train and test date ranges overlap")
        elif self.train_fraction is None or not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")

    def apply(self, series: NodeSeries) -> tuple[NodeSeries, NodeSeries]:
        self.validate()
        if self.by_date:
            return (series.between(self.train_start, self.train_end),
                    series.between(self.test_start, self.test_end))
        return series.split_fraction(self.train_fraction)


def fit_model(train: NodeSeries, k: int = 5, smoothing_alpha: float = 0.0,
              config: DetectorConfig = DetectorConfig()) -> Model:
    """Fit quantile bins and a transition matrix on a training series."""
    if len(train) < 2:
        raise FitError(f"training split has {len(train)} point(s); need at least 2")
    binner = fit_bins(train.values, k)
    tpm = build_transition_matrix(encode_series(binner, train), k, smoothing_alpha)
    trained_on = {"mote_id": train.mote_id, "interval_s": train.interval,
                  "n_samples": len(train)}
    return Model(binner, tpm, config, train.feature, trained_on)


def detect_series(model: Model, series: NodeSeries) -> DetectionReport:
    if model.binner is None:
        raise DataError("model has no bin edges; it cannot score raw readings")
    return detect(encode_series(model.binner, series), model.tpm, model.config)


@dataclass
class NodeResult:
    mote_id: int
    model: Model
    report: DetectionReport


def detect_nodes(series_by_node: Mapping[int, NodeSeries], model: Model, split: Split | None = None,
                 refit: bool = False, jobs: int = 1) -> dict[int, NodeResult]:
    """Run detection on several nodes.

    With ``split`` each node is scored on its test part only. With ``refit``
    every node gets its own bins and matrix, fitted on its training part with
    the hyperparameters of ``model``. Results are keyed and ordered by mote id.
    """

    def one(mote: int) -> NodeResult:
        series = series_by_node[mote]
        train, test = split.apply(series) if split is not None else (series, series)
        node_model = model
        if refit:
            alpha = model.tpm.smoothing_alpha
            node_model = fit_model(train, model.tpm.k, alpha, model.config)
        return NodeResult(mote, node_model, detect_series(node_model, test))

    motes = sorted(series_by_node)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, motes))
    else:
        results = [one(m) for m in motes]
    return {r.mote_id: r for r in results}


def series_for_nodes(records: Sequence[SensorRecord], motes: Sequence[int], feature: str,
                     interval: int) -> dict[int, NodeSeries]:
    out = {}
    for mote in motes:
        try:
            out[mote] = build_series(records, mote, feature, interval)
        except EmptySeriesError:
            log.warning("mote %s has no %s readings; skipped", mote, feature)
    return out


def rates_from_results(results: Mapping[int, NodeResult]) -> tuple[dict, dict, dict]:
    """Return ``(rates, windows, anomalies)`` dictionaries keyed by mote id."""
    windows = {m: r.report.n_windows for m, r in results.items()}
    anomalies = {m: r.report.n_anomalies for m, r in results.items()}
    return node_anomaly_rates(anomalies, windows), windows, anomalies


# -- synthetic benchmark -------------------------------------------------------

def render_values(states: np.ndarray, seed: int, jitter: float = 0.4) -> np.ndarray:
    """Continuous readings for a state sequence: ``state + U(-jitter, jitter)``.

    Every value stays inside the range spanned by the states themselves, so a
    forced jump between states never leaves the global value range.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    return states.astype(float) + rng.uniform(-jitter, jitter, size=states.size)


@dataclass
class BenchmarkResult:
    truth: ChainSpec
    sequence: np.ndarray
    values: np.ndarray
    labels: LabelSet
    markov_flags: list[AnomalyFlag]
    zscore_flags: list[AnomalyFlag]
    zscore: ZScoreDetector
    markov: MetricsReport
    zscore_metrics: MetricsReport
    tpm: TransitionMatrix

    def metrics_dict(self, params: Mapping | None = None) -> dict:
        return {"params": dict(params or {}),
                "markov": self.markov.to_dict(),
                "zscore": self.zscore_metrics.to_dict(),
                "n_labels": len(self.labels)}


def _derive(seed: int, offset: int) -> int:
    return (int(seed) + offset) % 2 ** 64


def run_benchmark(seed: int = 0, n: int = 10_000, rate: float = 0.01, theta: float = 0.05,
                  z_threshold: float = 3.0, truth_probs=MOTE6_TPM, mode: str = ZERO_PROB,
                  p_max: float = 0.0, model: str = "truth", train_n: int = 10_000) -> BenchmarkResult:
    """Markov-vs-Z-score comparison on a chain with injected transitions.

    Seeds: test chain ``seed``, clean training chain ``seed+1``, injection
    ``seed+2``, value jitter (test) ``seed+3``, value jitter (train) ``seed+4``.
    ``model="truth"`` scores with the ground-truth matrix; ``"learned"``
    estimates one from the clean training chain. The Z-score detector is
    always fitted on the training chain's values. Z-score point verdicts are
    mapped onto the transition entering each point.
    """
    truth = ChainSpec(truth_probs, 0, seed)
    clean = sample_chain(truth, n)
    train_states = sample_chain(ChainSpec(truth_probs, 0, _derive(seed, 1)), train_n)
    corrupted, labels = inject(clean, InjectionPlan(rate, mode, p_max, _derive(seed, 2)), truth)

    if model == "truth":
        tpm = TransitionMatrix.from_probs(truth.probs)
    elif model == "learned":
        tpm = build_transition_matrix([train_states], truth.k)
    else:
        raise ValueError("model must be 'truth' or 'learned'")
    config = DetectorConfig(theta=theta, window_size=2)
    markov_flags = detect([corrupted], tpm, config).flags

    values = render_values(corrupted, _derive(seed, 3))
    zdet = fit_zscore(render_values(train_states, _derive(seed, 4)), z_threshold)
    zflags = zscore_flags(zdet, [values], align_to_transitions=True)

    universe = {(0, t) for t in range(corrupted.size - 1)}
    return BenchmarkResult(
        truth=truth, sequence=corrupted, values=values, labels=labels,
        markov_flags=markov_flags, zscore_flags=zflags, zscore=zdet,
        markov=evaluate(markov_flags, labels, universe),
        zscore_metrics=evaluate(zflags, labels, universe), tpm=tpm)
