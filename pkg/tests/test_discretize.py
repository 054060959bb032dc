import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsnmarkov.discretize import QuantileBinner, assign_state, encode_series, fit_bins
from wsnmarkov.exceptions import FitError, StateDomainError
from wsnmarkov.ingestion import NodeSeries


def quantile_type7(values, q):
    """Order-statistic oracle, independent of numpy.quantile."""
    x = sorted(values)
    h = (len(x) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(x) - 1)
    return x[lo] + (h - lo) * (x[hi] - x[lo])


def hourly(values, missing=()):
    hours = [h for h in range(len(values) + len(missing)) if h not in missing]
    starts = np.array(hours, dtype=np.int64) * 3600 * 10**6
    gaps = np.array(sorted(missing), dtype=np.int64) * 3600 * 10**6
    return NodeSeries(6, "temperature", 3600, starts.astype("datetime64[us]"), values,
                      gaps=gaps.astype("datetime64[us]"))


def test_edges_one_to_eight_k4():
    b = fit_bins(range(1, 9), 4)
    # h = 7q -> 1.75, 3.5, 5.25 -> 2.75, 4.5, 6.25
    assert b.edges == (2.75, 4.5, 6.25)
    states = b.assign(np.arange(1, 9))
    assert np.bincount(states, minlength=4).tolist() == [2, 2, 2, 2]
    assert b.fit_count == 8


def test_single_state():
    b = fit_bins([3.0, -1.0, 7.5], 1)
    assert b.edges == ()
    assert b.assign([-1e9, 0.0, 1e9]).tolist() == [0, 0, 0]


def test_constant_sample():
    b = fit_bins([4.2] * 10, 5)
    assert b.edges == (4.2,) * 4
    assert assign_state(b, 4.2) == 0
    assert assign_state(b, 4.3) == 4


@pytest.mark.parametrize("value, state", [(15, 1), (-100, 0), (10, 0), (20, 1), (20.0001, 2), (1e6, 2)])
def test_assign_state(value, state):
    assert assign_state(QuantileBinner(3, (10, 20)), value) == state


def test_tie_rule():
    assert assign_state(QuantileBinner(3, (10, 10)), 10) == 0


def test_errors():
    with pytest.raises(FitError):
        fit_bins([], 3)
    with pytest.raises(FitError):
        fit_bins([1.0, 2.0], 0)
    with pytest.raises(FitError):
        fit_bins([1.0, float("nan")], 2)
    with pytest.raises(StateDomainError):
        assign_state(QuantileBinner(2, (1.0,)), float("inf"))
    with pytest.raises(FitError):
        QuantileBinner(3, (2.0, 1.0))
    with pytest.raises(FitError):
        QuantileBinner(3, (1.0,))


def test_encode_series_segments():
    b = fit_bins(range(10), 5)
    assert [s.tolist() for s in encode_series(b, hourly([0.0, 3.0, 5.0, 7.0, 9.0]))] == [[0, 1, 2, 3, 4]]
    segs = encode_series(b, hourly([0.0, 3.0, 5.0, 7.0, 9.0], missing={2}))
    assert [s.tolist() for s in segs] == [[0, 1], [2, 3, 4]]
    assert encode_series(b, hourly([])) == []


def test_binner_dict_round_trip():
    b = fit_bins(np.linspace(0, 1, 11), 5)
    assert QuantileBinner.from_dict(b.to_dict()) == b


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=80), st.integers(1, 8))
def test_edges_match_oracle(values, k):
    b = fit_bins(values, k)
    expected = [quantile_type7(values, i / k) for i in range(1, k)]
    assert b.edges == pytest.approx(expected, rel=1e-12, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=200, unique=True), st.integers(1, 10))
def test_bin_balance_distinct_values(values, k):
    n = len(values)
    counts = np.bincount(fit_bins(values, k).assign(values), minlength=k)
    assert counts.min() >= n // k - 1
    assert counts.max() <= -(-n // k) + 1


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=50), st.integers(1, 6), finite, finite)
def test_assign_monotone(values, k, a, b):
    binner = fit_bins(values, k)
    lo, hi = sorted((a, b))
    assert assign_state(binner, lo) <= assign_state(binner, hi)
    assert 0 <= assign_state(binner, lo) < k


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=0, max_size=40), st.sets(st.integers(1, 40), max_size=8))
def test_encode_preserves_point_count(values, missing):
    missing = {m for m in missing if m < len(values)}
    s = hourly(values, missing)
    binner = fit_bins(values or [0.0], 3)
    segs = encode_series(binner, s)
    assert sum(len(x) for x in segs) == len(values)
    runs = sum(1 for m in missing if m - 1 not in missing)
    assert len(segs) == (0 if not values else 1 + runs)
