"""Parsing and resampling of Intel-lab style sensor logs.

The raw log has one reading per line with eight whitespace separated
columns::

    2004-02-28 00:59:16.02785 3 1 19.9884 37.0933 45.08 2.69964
    date       time           epoch mote temperature humidity light voltage

Rows that cannot be parsed are not errors; they come back as
:class:`Rejection` values and are tallied in an :class:`IngestSummary`.
Accepted records are grouped per node and averaged into fixed,
epoch-aligned buckets by :func:`build_series`. Empty buckets are kept as
gaps and never filled.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Iterator, Sequence

import numpy as np

from .exceptions import DataError, EmptySeriesError

FEATURES = ("temperature", "humidity", "light", "voltage")
N_COLUMNS = 8
DEFAULT_MOTE_RANGE = (1, 54)
DEFAULT_INTERVAL_S = 3600

_US_PER_S = 1_000_000


class RejectReason(str, enum.Enum):
    MISSING_FIELD = "missing_field"
    EXTRA_FIELD = "extra_field"
    BAD_TIMESTAMP = "bad_timestamp"
    BAD_NUMBER = "unparseable_number"
    NON_FINITE = "non_finite_value"
    MOTE_OUT_OF_RANGE = "mote_out_of_range"


@dataclass(frozen=True)
class Rejection:
    reason: RejectReason
    line: str

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class SensorRecord:
    timestamp: datetime
    epoch: int
    mote_id: int
    temperature: float
    humidity: float
    light: float
    voltage: float

    def value(self, feature: str) -> float:
        if feature not in FEATURES:
            raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURES}")
        return getattr(self, feature)

    def format(self) -> str:
        """Serialize back to a log line (shortest round-trip float repr)."""
        ts = self.timestamp.strftime("%Y-%m-%d %H:%M:%S.%f")
        nums = (self.temperature, self.humidity, self.light, self.voltage)
        return " ".join([ts, str(self.epoch), str(self.mote_id), *(repr(x) for x in nums)])


def _parse_timestamp(date: str, time: str) -> datetime:
    y, mo, d = date.split("-")
    hms, _, frac = time.partition(".")
    h, mi, s = hms.split(":")
    if frac and (not frac.isdigit() or len(frac) > 6):
        raise ValueError(f"bad fractional seconds {frac!r}")
    micro = int(frac.ljust(6, "0")) if frac else 0
    return datetime(int(y), int(mo), int(d), int(h), int(mi), int(s), micro)


def parse_record(
    line: str, mote_range: tuple[int, int] = DEFAULT_MOTE_RANGE
) -> SensorRecord | Rejection:
    """Parse one log row into a :class:`SensorRecord` or a :class:`Rejection`.

    ``mote_range`` is inclusive on both ends.
    """
    parts = line.split()
    if len(parts) < N_COLUMNS:
        return Rejection(RejectReason.MISSING_FIELD, line)
    if len(parts) > N_COLUMNS:
        return Rejection(RejectReason.EXTRA_FIELD, line)
    date, time, epoch_s, mote_s, *channels = parts
    try:
        timestamp = _parse_timestamp(date, time)
    except ValueError:
        return Rejection(RejectReason.BAD_TIMESTAMP, line)
    try:
        epoch = int(epoch_s)
        mote_id = int(mote_s)
        values = [float(c) for c in channels]
    except ValueError:
        return Rejection(RejectReason.BAD_NUMBER, line)
    if epoch < 0:
        return Rejection(RejectReason.BAD_NUMBER, line)
    if not all(math.isfinite(v) for v in values):
        return Rejection(RejectReason.NON_FINITE, line)
    lo, hi = mote_range
    if not lo <= mote_id <= hi:
        return Rejection(RejectReason.MOTE_OUT_OF_RANGE, line)
    return SensorRecord(timestamp, epoch, mote_id, *values)


@dataclass
class IngestSummary:
    rows_read: int = 0
    rows_accepted: int = 0
    rejections: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rejections": {str(k.value if isinstance(k, RejectReason) else k): v
                           for k, v in sorted(self.rejections.items(), key=lambda kv: str(kv[0]))},
        }

    def write_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def parse_lines(
    lines: Iterable[str], mote_range: tuple[int, int] = DEFAULT_MOTE_RANGE
) -> tuple[list[SensorRecord], IngestSummary]:
    """Parse many rows. Blank lines are skipped and not counted as rows."""
    records = []
    summary = IngestSummary()
    for line in lines:
        if not line.strip():
            continue
        summary.rows_read += 1
        rec = parse_record(line, mote_range)
        if isinstance(rec, Rejection):
            summary.rejections[rec.reason] += 1
        else:
            records.append(rec)
    summary.rows_accepted = len(records)
    return records, summary


def read_log(
    path: str | os.PathLike, mote_range: tuple[int, int] = DEFAULT_MOTE_RANGE
) -> tuple[list[SensorRecord], IngestSummary]:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return parse_lines(fh, mote_range)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NodeSeries:
    """Regularly resampled univariate series for one node and feature.

    ``bucket_starts`` are ``datetime64[us]`` values aligned to multiples of
    ``interval`` seconds since the Unix epoch. ``counts`` holds the number of
    raw readings averaged into each point; it is ``None`` for series read back
    from CSV. ``gaps`` lists the empty buckets strictly inside the covered span.
    """

    mote_id: int
    feature: str
    interval: int
    bucket_starts: np.ndarray
    values: np.ndarray
    counts: np.ndarray | None = None
    gaps: np.ndarray = field(default_factory=lambda: np.array([], dtype="datetime64[us]"))

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("interval must be positive")
        starts = np.asarray(self.bucket_starts, dtype="datetime64[us]")
        values = np.asarray(self.values, dtype=float)
        if starts.shape != values.shape:
            raise ValueError("bucket_starts and values differ in length")
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")
        idx = starts.astype(np.int64)
        if idx.size and np.any(idx % (self.interval * _US_PER_S)):
            raise ValueError("bucket starts are not aligned to the interval")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("bucket starts must be strictly increasing")
        object.__setattr__(self, "bucket_starts", _readonly(starts.copy()))
        object.__setattr__(self, "values", _readonly(values.copy()))
        if self.counts is not None:
            object.__setattr__(self, "counts", _readonly(np.asarray(self.counts, dtype=np.int64).copy()))
        object.__setattr__(self, "gaps", _readonly(np.asarray(self.gaps, dtype="datetime64[us]").copy()))

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NodeSeries):
            return NotImplemented
        same_counts = (self.counts is None and other.counts is None) or (
            self.counts is not None and other.counts is not None
            and np.array_equal(self.counts, other.counts))
        return (self.mote_id == other.mote_id and self.feature == other.feature
                and self.interval == other.interval
                and np.array_equal(self.bucket_starts, other.bucket_starts)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.gaps, other.gaps) and same_counts)

    @property
    def bucket_index(self) -> np.ndarray:
        """Integer bucket numbers (bucket start // interval)."""
        return self.bucket_starts.astype(np.int64) // (self.interval * _US_PER_S)

    @property
    def points(self) -> list[tuple[datetime, float]]:
        return [(t.item(), float(v)) for t, v in zip(self.bucket_starts, self.values)]

    def _subset(self, mask: np.ndarray) -> "NodeSeries":
        starts = self.bucket_starts[mask]
        gaps = self.gaps
        if starts.size:
            gaps = gaps[(gaps > starts[0]) & (gaps < starts[-1])]
        else:
            gaps = gaps[:0]
        counts = None if self.counts is None else self.counts[mask]
        return NodeSeries(self.mote_id, self.feature, self.interval, starts,
                          self.values[mask], counts, gaps)

    def between(self, start=None, end=None) -> "NodeSeries":
        """Points with ``start <= bucket_start < end`` (either bound optional)."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.bucket_starts >= np.datetime64(start, "us")
        if end is not None:
            mask &= self.bucket_starts < np.datetime64(end, "us")
        return self._subset(mask)

    def split_fraction(self, fraction: float) -> tuple["NodeSeries", "NodeSeries"]:
        """Split into a leading ``fraction`` of points and the remainder."""
        if not 0.0 < fraction < 1.0:
            raise ValueError("split fraction must lie strictly between 0 and 1")
        cut = int(math.floor(len(self) * fraction))
        mask = np.arange(len(self)) < cut
        return self._subset(mask), self._subset(~mask)


def build_series(
    records: Sequence[SensorRecord],
    mote_id: int,
    feature: str = "temperature",
    interval: int = DEFAULT_INTERVAL_S,
) -> NodeSeries:
    """Average one node's readings of ``feature`` into ``interval``-second buckets.

    Records may be unordered and may belong to other motes. The result does
    not depend on input order: readings are put in canonical (time, value)
    order before summation.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    if feature not in FEATURES:
        raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURES}")
    mine = [r for r in records if r.mote_id == mote_id]
    if not mine:
        raise EmptySeriesError(f"no readings for mote {mote_id}")
    times = np.array([r.timestamp for r in mine], dtype="datetime64[us]").astype(np.int64)
    values = np.array([getattr(r, feature) for r in mine], dtype=float)
    order = np.lexsort((values, times))
    times, values = times[order], values[order]

    width = interval * _US_PER_S
    buckets = times // width
    uniq, first, counts = np.unique(buckets, return_index=True, return_counts=True)
    means = np.add.reduceat(values, first) / counts

    occupied = set(uniq.tolist())
    gaps = [b for b in range(int(uniq[0]), int(uniq[-1]) + 1) if b not in occupied]
    return NodeSeries(
        mote_id=mote_id,
        feature=feature,
        interval=interval,
        bucket_starts=(uniq * width).astype("datetime64[us]"),
        values=means,
        counts=counts,
        gaps=(np.array(gaps, dtype=np.int64) * width).astype("datetime64[us]"),
    )


def motes_in(records: Iterable[SensorRecord]) -> list[int]:
    return sorted({r.mote_id for r in records})


# -- CSV serialization -------------------------------------------------------

SERIES_HEADER = ("bucket_start", "value")


def _rfc3339(t: np.datetime64) -> str:
    return np.datetime_as_string(t, unit="s") + "Z"


def write_series_csv(series: NodeSeries, path_or_buf) -> None:
    """Write ``bucket_start,value`` rows; timestamps are RFC 3339 in UTC."""
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for t, v in zip(series.bucket_starts, series.values):
            w.writerow((_rfc3339(t), repr(float(v))))
    finally:
        if own:
            fh.close()


def _iter_rows(path_or_buf) -> Iterator[dict]:
    if isinstance(path_or_buf, (str, os.PathLike)):
        with open(path_or_buf, newline="") as fh:
            yield from csv.DictReader(fh)
    else:
        yield from csv.DictReader(path_or_buf)


def read_series_csv(path_or_buf, mote_id: int, feature: str = "temperature",
                    interval: int = DEFAULT_INTERVAL_S) -> NodeSeries:
    """Read a series written by :func:`write_series_csv`.

    Gaps are reconstructed from missing buckets between consecutive rows.
    """
    starts, values = [], []
    for row in _iter_rows(path_or_buf):
        try:
            starts.append(np.datetime64(row["bucket_start"].rstrip("Z"), "us"))
            values.append(float(row["value"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"bad series row {row!r}") from exc
    if not starts:
        raise EmptySeriesError("series file has no rows")
    starts = np.array(starts, dtype="datetime64[us]")
    width = interval * _US_PER_S
    idx = starts.astype(np.int64) // width
    occupied = set(idx.tolist())
    gaps = [b for b in range(int(idx.min()), int(idx.max()) + 1) if b not in occupied]
    try:
        return NodeSeries(mote_id, feature, interval, starts, np.array(values),
                          None, (np.array(gaps, dtype=np.int64) * width).astype("datetime64[us]"))
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def series_to_csv_text(series: NodeSeries) -> str:
    buf = io.StringIO()
    write_series_csv(series, buf)
    return buf.getvalue()
