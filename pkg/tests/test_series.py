import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellgraph.errors import UndefinedStatisticError
from cellgraph.records import FlowRecord
from cellgraph.series import (
    TimeSeries,
    aggregate,
    autocorrelation,
    concentration,
    cross_correlation,
    read_series_csv,
    top_share,
    write_series_csv,
)

from oracles import pearson_direct


def flow(t0, t1, down, cell="c1", up=0, user="u1", app="web"):
    return FlowRecord(user, cell, t0, t1, up, down, 1, 1, app, None)


def random_flows(rng, n, horizon=86400, cells=5):
    out = []
    for _ in range(n):
        t0 = int(rng.integers(0, horizon - 4000))
        out.append(flow(t0, t0 + int(rng.integers(0, 4000)), int(rng.integers(0, 10**6)),
                        cell=f"c{rng.integers(cells)}", up=int(rng.integers(0, 10**5)),
                        user=f"u{rng.integers(20)}", app=f"a{rng.integers(4)}"))
    return out


def test_uniform_proportional_split():
    s = aggregate([flow(0, 900, 300)], bin_width=300, span=(0, 900))
    assert s["c1"].values.tolist() == [100.0, 100.0, 100.0]


def test_zero_duration_goes_to_start_bin():
    s = aggregate([flow(100, 100, 100)], bin_width=300, span=(0, 900))
    assert s["c1"].values.tolist() == [100.0, 0.0, 0.0]


def test_flow_count_uses_start_bin():
    s = aggregate([flow(100, 800, 5), flow(650, 700, 5)], metric="flow_count", bin_width=300, span=(0, 900))
    assert s["c1"].values.tolist() == [1.0, 0.0, 1.0]


def test_start_attribution_flag():
    s = aggregate([flow(0, 900, 300)], bin_width=300, span=(0, 900), attribution="start")
    assert s["c1"].values.tolist() == [300.0, 0.0, 0.0]


def test_partial_overlap_with_span():
    # 600 bytes over [0, 600); only [300, 600) is inside the span
    s = aggregate([flow(0, 600, 600)], bin_width=300, span=(300, 900))
    assert s["c1"].values.tolist() == [300.0, 0.0]
    assert aggregate([flow(0, 100, 5)], bin_width=300, span=(300, 900)) == {}


def test_metric_and_key_selection():
    recs = [flow(0, 10, 7, up=3, cell="x", user="a", app="v")]
    assert aggregate(recs, "cell", "bytes_up", 300, (0, 300))["x"].values[0] == 3
    assert aggregate(recs, "user", "bytes_down", 300, (0, 300))["a"].values[0] == 7
    assert aggregate(recs, "app", "bytes_total", 300, (0, 300))["v"].values[0] == 10


def test_errors_and_empty():
    assert aggregate([], bin_width=300, span=(0, 900)) == {}
    with pytest.raises(ValueError):
        aggregate([flow(0, 1, 1)], bin_width=300, span=(10, 900))
    with pytest.raises(ValueError):
        aggregate([flow(0, 1, 1)], bin_width=300, span=(900, 900))


def test_conservation_random_flows():
    rng = np.random.default_rng(5)
    recs = random_flows(rng, 10)
    s = aggregate(recs, bin_width=300, span=(0, 86400))
    got = sum(ts.values.sum() for ts in s.values())
    want = sum(r.bytes_up + r.bytes_down for r in recs)
    assert math.isclose(got, want, rel_tol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coarsening_matches_direct(seed):
    recs = random_flows(np.random.default_rng(seed), 300)
    fine = aggregate(recs, bin_width=300, span=(0, 86400))
    coarse = aggregate(recs, bin_width=3600, span=(0, 86400))
    assert fine.keys() == coarse.keys()
    for k in fine:
        np.testing.assert_allclose(fine[k].coarsen(12).values, coarse[k].values, rtol=1e-9, atol=1e-6)


def test_threads_give_bit_identical_series():
    recs = random_flows(np.random.default_rng(1), 2000, cells=37)
    one = aggregate(recs, bin_width=900, threads=1)
    four = aggregate(recs, bin_width=900, threads=4)
    assert list(one) == list(four)
    for k in one:
        assert one[k].values.tobytes() == four[k].values.tobytes()


def test_timeseries_invariants():
    with pytest.raises(ValueError):
        TimeSeries("a", 10, 300, [1.0])
    with pytest.raises(ValueError):
        TimeSeries("a", 0, 300, [-1.0])
    with pytest.raises(ValueError):
        TimeSeries("a", 0, 300, [])


def periodic(n=240, period=24, shift=0, offset=2.0):
    t = np.arange(n)
    return offset + np.sin(2 * np.pi * (t - shift) / period)


def test_acf_lag0_and_constant():
    ts = TimeSeries("a", 0, 3600, np.random.default_rng(0).random(50))
    assert autocorrelation(ts, 5)[0] == 1.0
    with pytest.raises(UndefinedStatisticError):
        autocorrelation(TimeSeries("c", 0, 3600, [3.0] * 10), 2)


def test_acf_periodic_series():
    ts = TimeSeries("s", 0, 3600, periodic())
    acf = autocorrelation(ts, 24)
    x = ts.values
    assert acf[24] == pytest.approx(pearson_direct(list(x[:-24]), list(x[24:])), abs=1e-12)
    assert acf[24] >= 0.95
    assert np.all(np.abs(acf) <= 1.0)


def test_biased_estimator_matches_definition():
    x = np.random.default_rng(3).random(40)
    ts = TimeSeries("s", 0, 60, x)
    d = x - x.mean()
    want = [sum(d[t] * d[t + k] for t in range(40 - k)) / sum(d * d) for k in range(6)]
    np.testing.assert_allclose(autocorrelation(ts, 5, estimator="biased"), want, atol=1e-12)


def test_cross_correlation_examples():
    a = TimeSeries("a", 0, 3600, periodic())
    assert cross_correlation(a, a, 0) == pytest.approx(1.0, abs=1e-12)
    neg = TimeSeries("b", 0, 3600, 10.0 - a.values)
    assert cross_correlation(a, neg, 0) == pytest.approx(-1.0, abs=1e-12)
    shifted = TimeSeries("c", 0, 3600, periodic(shift=6))
    assert cross_correlation(a, shifted, 6) >= 0.95


def test_cross_correlation_aligns_absolute_time():
    x = np.random.default_rng(2).random(30)
    a = TimeSeries("a", 0, 60, x)
    b = TimeSeries("b", 600, 60, x[10:])  # b starts 10 bins later, same content
    assert cross_correlation(a, b, 0) == pytest.approx(1.0)


def test_cross_correlation_errors():
    a = TimeSeries("a", 0, 60, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        cross_correlation(a, TimeSeries("b", 0, 120, [1.0, 2.0, 3.0]), 0)
    with pytest.raises(ValueError):
        cross_correlation(a, a, 2)
    with pytest.raises(UndefinedStatisticError):
        cross_correlation(a, TimeSeries("b", 0, 60, [1.0, 1.0, 1.0]), 0)


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1e6), min_size=8, max_size=60), st.integers(0, 5))
def test_acf_equals_self_cross_correlation(values, k):
    ts = TimeSeries("s", 0, 60, values)
    try:
        want = cross_correlation(ts, ts, k)
    except UndefinedStatisticError:
        return
    try:
        got = autocorrelation(ts, k)[k]
    except UndefinedStatisticError:
        return
    assert got == pytest.approx(want, abs=1e-12)


def test_concentration_examples():
    assert top_share(concentration({f"e{i}": 10 for i in range(5)}), 0.2) == pytest.approx(0.2, abs=1e-9)
    totals = {"a": 99, "b": 0.25, "c": 0.25, "d": 0.25, "e": 0.25}
    assert top_share(concentration(totals), 0.2) == pytest.approx(0.99, abs=1e-12)
    with pytest.raises(ValueError):
        concentration({"a": 0, "b": 0})
    with pytest.raises(ValueError):
        top_share(concentration(totals), 0)


@given(st.dictionaries(st.text(min_size=1, max_size=4), st.floats(0, 1e9), min_size=1, max_size=40))
def test_concentration_curve_invariants(totals):
    if sum(totals.values()) <= 0:
        return
    c = concentration(totals)
    assert c.points[0] == (0.0, 0.0) and c.points[-1] == (1.0, 1.0)
    assert np.all(np.diff(c.p) > 0) and np.all(np.diff(c.s) >= 0)
    assert np.all(c.s >= c.p - 1e-12)
    grid = np.linspace(0.01, 1, 25)
    shares = [top_share(c, p) for p in grid]
    assert all(b >= a for a, b in zip(shares, shares[1:]))
    assert top_share(c, 1.0) == 1.0


def test_series_csv_round_trip():
    s = {"b": TimeSeries("b", 3600, 3600, [0.5, 1.0]), "a": TimeSeries("a", 3600, 3600, [2.0, 0.1])}
    buf = io.BytesIO()
    write_series_csv(s, buf)
    assert buf.getvalue().decode().splitlines()[0] == "entity_id,t0,bin_width,v0,v1"
    buf.seek(0)
    back = read_series_csv(buf)
    assert list(back) == ["a", "b"]
    assert all(np.array_equal(back[k].values, s[k].values) and back[k].t0 == 3600 for k in s)
