"""Confusion counts, precision/recall/F1 and node-wise anomaly rates."""

from __future__ import annotations

import csv
import json
import logging
import os
from collections.abc import Collection, Hashable, Iterable, Mapping
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

from .exceptions import EvaluationError
from .markov import AnomalyFlag

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelSet:
    positions: frozenset = frozenset()
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "positions", frozenset(self.positions))

    def __len__(self) -> int:
        return len(self.positions)

    def __contains__(self, key) -> bool:
        return key in self.positions


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()


@dataclass
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    degenerate: list[str] = field(default_factory=list)
    node_rates: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["node_rates"] = {str(k): v for k, v in self.node_rates.items()}
        return d

    def write_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _flag_keys(flags) -> set:
    keys = set()
    for f in flags:
        if isinstance(f, AnomalyFlag):
            if f.is_anomaly:
                keys.add((f.segment, f.position))
        else:
            keys.add(f)
    return keys


def confusion(flags: Iterable, labels: LabelSet | Iterable[Hashable],
              universe: int | Collection, slack: int = 0) -> tuple[int, int, int, int]:
    """Return ``(tp, fp, fn, tn)``.

    ``flags`` holds either :class:`AnomalyFlag` objects (only those with
    ``is_anomaly`` count) or bare keys. ``universe`` is either its size or the
    collection of all evaluable keys; in the latter case every flag and label
    must belong to it. With ``slack > 0`` keys must be ``(segment, position)``
    pairs: a label is a hit when some flag in the same segment lies within
    ``slack`` positions, and a flag is a false positive only when no label is
    that close.
    """
    predicted = _flag_keys(flags)
    actual = set(labels.positions if isinstance(labels, LabelSet) else labels)
    if isinstance(universe, int):
        size = universe
        if len(predicted | actual) > size:
            raise EvaluationError("more distinct flags/labels than the universe holds")
    else:
        keys = set(universe)
        size = len(keys)
        stray = (predicted | actual) - keys
        if stray:
            raise EvaluationError(f"{len(stray)} flags/labels fall outside the universe, "
                                  f"e.g. {sorted(stray, key=repr)[0]!r}")

    if slack <= 0:
        tp = len(predicted & actual)
        fp = len(predicted - actual)
        fn = len(actual - predicted)
    else:
        def near(key, pool):
            seg, pos = key
            return any((seg, pos + d) in pool for d in range(-slack, slack + 1))
        tp = sum(near(l, predicted) for l in actual)
        fn = len(actual) - tp
        fp = sum(not near(f, actual) for f in predicted)
    tn = size - tp - fp - fn
    if tn < 0:
        raise EvaluationError("confusion counts exceed the universe size")
    return tp, fp, fn, tn


def metrics(tp: int, fp: int, fn: int) -> PRF:
    """Precision, recall and their harmonic mean.

    An undefined ratio (zero denominator) is reported as 0 and its name is
    listed in ``degenerate``.
    """
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    degenerate = []
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    f1 = f1_score(precision, recall)
    return PRF(precision, recall, f1, tuple(degenerate))


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def evaluate(flags, labels, universe, slack: int = 0, node_rates: Mapping | None = None) -> MetricsReport:
    tp, fp, fn, tn = confusion(flags, labels, universe, slack)
    prf = metrics(tp, fp, fn)
    return MetricsReport(tp, fp, fn, tn, prf.precision, prf.recall, prf.f1,
                         list(prf.degenerate), dict(node_rates or {}))


def node_anomaly_rates(flag_counts: Mapping, window_counts: Mapping) -> dict:
    """Percentage of windows flagged, per node. Nodes without windows are dropped."""
    rates = {}
    for node in sorted(window_counts):
        windows = window_counts[node]
        if windows <= 0:
            log.warning("node %s has no evaluated windows; omitted from rates", node)
            continue
        rates[node] = 100.0 * flag_counts.get(node, 0) / windows
    return rates


def rank_nodes(rates: Mapping, n: int = 10) -> tuple[list, list]:
    """Return the ``n`` highest-rate and ``n`` lowest-rate nodes.

    Ties are broken by node id so the ranking is deterministic.
    """
    top = sorted(rates, key=lambda node: (-rates[node], node))[:n]
    bottom = sorted(rates, key=lambda node: (rates[node], node))[:n]
    return top, bottom


# -- files ----------------------------------------------------------------------

def read_labels_csv(path: str | os.PathLike, provenance: str = "") -> LabelSet:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ("segment", "position"):
            raise EvaluationError(f"{path}: expected header segment,position")
        try:
            keys = {(int(r["segment"]), int(r["position"])) for r in reader}
        except ValueError as exc:
            raise EvaluationError(f"{path}: {exc}") from exc
    return LabelSet(frozenset(keys), provenance or os.fspath(path))


def write_labels_csv(labels: LabelSet, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("segment", "position"))
        w.writerows(sorted(labels.positions))


def write_node_rates_csv(rates: Mapping, windows: Mapping, anomalies: Mapping,
                         path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mote_id", "windows", "anomalies", "rate_pct"))
        for node in sorted(rates):
            w.writerow((node, windows[node], anomalies.get(node, 0), repr(float(rates[node]))))


def write_ranking_csv(rates: Mapping, path: str | os.PathLike, n: int = 10) -> None:
    top, bottom = rank_nodes(rates, n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("group", "rank", "mote_id", "rate_pct"))
        for group, nodes in (("high", top), ("low", bottom)):
            for i, node in enumerate(nodes, 1):
                w.writerow((group, i, node, repr(float(rates[node]))))
