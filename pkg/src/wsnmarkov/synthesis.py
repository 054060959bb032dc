"""Seeded Markov chain sampling and labeled anomaly injection.

Sequences come from a known transition matrix so estimator and detector
accuracy can be checked against ground truth.

Generator scheme (fixed; other implementations can reproduce it):

* uniforms ``u[0..n-1]`` are the first ``n`` draws of
  ``numpy.random.Generator(PCG64(seed)).random(n)`` (PCG64 XSL-RR 128/64,
  53-bit doubles);
* ``u[0]`` selects the initial state when ``initial_state="stationary"``,
  otherwise it is drawn and discarded;
* state ``t+1`` is the smallest ``j`` with ``u[t+1] < cumsum(P[x_t])[j]``
  (inverse CDF; the cumulative row is pinned to exactly 1.0 from its last
  positive entry on, so zero-probability states are never produced).
"""

from __future__ import annotations

import bisect
import csv
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluation import LabelSet, read_labels_csv, write_labels_csv
from .exceptions import DataError

log = logging.getLogger(__name__)

# Reference transition matrix for an HVAC-adjacent node (mote 6), states S1..S5.
MOTE6_TPM = np.array([
    [0.60, 0.30, 0.05, 0.05, 0.00],
    [0.10, 0.70, 0.15, 0.05, 0.00],
    [0.05, 0.10, 0.75, 0.10, 0.00],
    [0.00, 0.00, 0.20, 0.70, 0.10],
    [0.00, 0.00, 0.00, 0.15, 0.85],
])
MOTE6_TPM.setflags(write=False)

STATIONARY = "stationary"
ZERO_PROB = "zero_prob_transition"
LOW_PROB = "low_prob_transition"


@dataclass(frozen=True, eq=False)
class ChainSpec:
    probs: np.ndarray
    initial_state: int | str = 0
    seed: int = 0

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ValueError("probs must be a non-empty square matrix")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("every row of probs must be a distribution (sum to 1 within 1e-12)")
        if self.initial_state != STATIONARY and not 0 <= int(self.initial_state) < p.shape[0]:
            raise ValueError("initial_state must be a state index or 'stationary'")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def k(self) -> int:
        return self.probs.shape[0]

    def to_dict(self) -> dict:
        return {"k": self.k, "probs": self.probs.tolist(),
                "initial_state": self.initial_state, "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        init = d.get("initial_state", 0)
        spec = cls(np.asarray(d["probs"], dtype=float),
                   init if init == STATIONARY else int(init), int(d.get("seed", 0)))
        if "k" in d and d["k"] != spec.k:
            raise DataError("truth k does not match probs shape")
        return spec


def stationary_distribution(probs: np.ndarray) -> np.ndarray:
    """Solve ``pi P = pi`` with ``sum(pi) = 1`` in the least-squares sense."""
    k = probs.shape[0]
    a = np.vstack([probs.T - np.eye(k), np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(a, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _cumulative(row: np.ndarray) -> list[float]:
    cum = np.cumsum(row)
    last = int(np.flatnonzero(row > 0)[-1])
    cum[last:] = 1.0
    return cum.tolist()


def sample_chain(spec: ChainSpec, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    u = rng.random(n).tolist()
    if spec.initial_state == STATIONARY:
        state = bisect.bisect_right(_cumulative(stationary_distribution(spec.probs)), u[0])
    else:
        state = int(spec.initial_state)
    rows = [_cumulative(r) for r in spec.probs]
    out = [state]
    for x in u[1:]:
        state = bisect.bisect_right(rows[state], x)
        out.append(state)
    return np.array(out, dtype=np.int64)


@dataclass(frozen=True)
class InjectionPlan:
    """Where and how to corrupt a sequence.

    ``round(rate * len(sequence))`` sites are corrupted. ``p_max`` is only
    used in ``low_prob_transition`` mode.
    """

    rate: float
    mode: str = ZERO_PROB
    p_max: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("rate must lie in [0, 1]")
        if self.mode not in (ZERO_PROB, LOW_PROB):
            raise ValueError(f"mode must be {ZERO_PROB!r} or {LOW_PROB!r}")
        if self.p_max < 0:
            raise ValueError("p_max must be non-negative")


def _is_improbable(p: float, plan: InjectionPlan) -> bool:
    return p == 0.0 if plan.mode == ZERO_PROB else p <= plan.p_max


def _targets(seq: np.ndarray, t: int, probs: np.ndarray, plan: InjectionPlan) -> list[int]:
    # The forced transition must be improbable; the one leaving the forced
    # state must not be, so the labels cover every improbable transition.
    a, orig = seq[t], seq[t + 1]
    nxt = seq[t + 2] if t + 2 < seq.size else None
    out = []
    for j in range(probs.shape[0]):
        if j == orig or not _is_improbable(probs[a, j], plan):
            continue
        if nxt is not None and _is_improbable(probs[j, nxt], plan):
            continue
        out.append(j)
    return out


def inject(sequence: Sequence[int], plan: InjectionPlan, truth: ChainSpec) -> tuple[np.ndarray, LabelSet]:
    """Replace successor states at randomly chosen sites with improbable ones.

    A site ``t`` keeps ``x[t]`` and overwrites ``x[t+1]`` with a state ``j``
    whose truth probability from ``x[t]`` is zero (or at most ``p_max``); the
    label is ``(0, t)``. Sites are at least two positions apart and only
    positions with an admissible ``j`` are eligible, so the transition out of
    ``j`` stays ordinary. If too few positions qualify, fewer sites are used
    and a warning is logged.
    """
    seq = np.array(sequence, dtype=np.int64)
    want = int(round(plan.rate * seq.size))
    if want == 0 or seq.size < 2:
        return seq, LabelSet(frozenset(), f"injected:{plan.mode}")
    rng = np.random.Generator(np.random.PCG64(plan.seed))
    probs = truth.probs

    candidates = [t for t in range(seq.size - 1) if _targets(seq, t, probs, plan)]
    chosen: list[int] = []
    taken: set[int] = set()
    for t in rng.permutation(np.array(candidates, dtype=np.int64)).tolist():
        if len(chosen) == want:
            break
        if t in taken or t - 1 in taken or t + 1 in taken:
            continue
        chosen.append(t)
        taken.add(t)
    if len(chosen) < want:
        log.warning("only %d of %d injection sites admissible", len(chosen), want)

    out = seq.copy()
    for t in sorted(chosen):
        options = _targets(seq, t, probs, plan)
        out[t + 1] = options[int(rng.integers(len(options)))]
    return out, LabelSet(frozenset((0, t) for t in chosen), f"injected:{plan.mode}")


# -- benchmark bundle -------------------------------------------------------------

def write_bundle(directory: str | os.PathLike, truth: ChainSpec, sequence: Sequence[int],
                 labels: LabelSet, values: Sequence[float] | None = None) -> Path:
    """Write ``truth.json``, ``sequence.csv`` and ``labels.csv`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "truth.json", "w") as fh:
        json.dump(truth.to_dict(), fh, indent=2)
        fh.write("\n")
    with open(d / "sequence.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if values is None:
            w.writerow(("position", "state"))
            w.writerows(enumerate(int(s) for s in sequence))
        else:
            w.writerow(("position", "state", "value"))
            for i, (s, v) in enumerate(zip(sequence, values)):
                w.writerow((i, int(s), repr(float(v))))
    write_labels_csv(labels, d / "labels.csv")
    return d


def read_bundle(directory: str | os.PathLike):
    """Return ``(truth, states, values_or_None, labels)``."""
    d = Path(directory)
    with open(d / "truth.json") as fh:
        truth = ChainSpec.from_dict(json.load(fh))
    states, values = [], []
    with open(d / "sequence.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        has_values = "value" in (reader.fieldnames or ())
        for row in reader:
            states.append(int(row["state"]))
            if has_values:
                values.append(float(row["value"]))
    labels = read_labels_csv(d / "labels.csv", provenance=f"bundle:{d.name}")
    return truth, np.array(states, dtype=np.int64), (np.array(values) if has_values else None), labels
