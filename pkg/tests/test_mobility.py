import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from celloffload.mobility import (
    ContactGraph,
    ContactTrace,
    DurationDistribution,
    RateDistribution,
    TraceParseError,
    concat_traces,
    estimate_mean_rate,
    generate_trace,
    load_trace,
    sample_graph,
    save_trace,
)


def homogeneous_graph(n, rate):
    r = np.full((n, n), rate)
    np.fill_diagonal(r, 0.0)
    return ContactGraph(r, rate)


TINY = DurationDistribution(1e-9)


# --- distributions ------------------------------------------------------------------

@pytest.mark.parametrize("rel", [0.3, 0.58, 1.0, 2.0])
def test_pareto_shape_reproduces_moments(rel):
    d = RateDistribution(1.0, rel)
    k, xm = d.shape, d.scale
    mean = k * xm / (k - 1)
    var = xm**2 * k / ((k - 1) ** 2 * (k - 2))
    assert mean == pytest.approx(1.0)
    assert math.sqrt(var) == pytest.approx(rel)


def test_rate_sample_moments():
    d = RateDistribution(2.0, 0.5)  # shape above 4, so the sample variance settles
    x = d.sample(np.random.default_rng(0), 400_000)
    assert x.min() >= d.scale
    assert x.mean() == pytest.approx(2.0, rel=5e-3)
    assert x.std() == pytest.approx(0.5, rel=3e-2)


def test_zero_stddev_is_constant():
    d = RateDistribution(3.0, 0.0)
    assert math.isinf(d.shape)
    assert np.all(d.sample(np.random.default_rng(1), 10) == 3.0)


def test_rate_distribution_rejects_bad_input():
    with pytest.raises(ValueError):
        RateDistribution(0.0, 1.0)
    with pytest.raises(ValueError):
        RateDistribution(1.0, -1.0)
    with pytest.raises(ValueError):
        RateDistribution(1.0, 1.0, kind="lognormal")


def test_duration_distribution_scale_and_median():
    d = DurationDistribution(66.46)
    assert d.scale == pytest.approx(33.23)
    x = d.sample(np.random.default_rng(2), 200_000)
    assert x.min() >= d.scale
    # alpha = 2: median = x_m * sqrt(2)
    assert np.median(x) == pytest.approx(d.scale * math.sqrt(2), rel=1e-2)
    with pytest.raises(ValueError):
        DurationDistribution(10.0, shape=1.0)


# --- contact graph ------------------------------------------------------------------

def test_sample_graph_structure():
    g = sample_graph(30, RateDistribution(1.0, 0.5), never_meet_prob=0.3, rng_seed=4)
    r = g.rates
    assert np.array_equal(r, r.T)
    assert np.all(np.diag(r) == 0)
    pairs = r[np.triu_indices(30, 1)]
    assert abs(np.mean(pairs == 0) - 0.3) < 0.06
    assert g.mean_rate == 1.0
    with pytest.raises(ValueError):
        r[0, 1] = 5.0  # read-only


def test_sample_graph_reproducible():
    dist = RateDistribution(1.0, 1.0)
    a = sample_graph(10, dist, rng_seed=7).rates
    b = sample_graph(10, dist, rng_seed=7).rates
    assert np.array_equal(a, b)


def test_contact_graph_validation():
    with pytest.raises(ValueError):
        ContactGraph(np.array([[0.0, 1.0], [2.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        ContactGraph(np.array([[1.0, 1.0], [1.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        sample_graph(1, RateDistribution(1.0, 0.0))


def test_node_rates_and_scaling():
    g = homogeneous_graph(5, 0.5)
    assert np.allclose(g.node_rates(), 2.0)
    assert np.allclose(g.scaled(3).rates[0, 1], 1.5)


# --- trace generation -----------------------------------------------------------------

def test_poisson_count_within_three_sigma():
    n, rate, horizon = 20, 0.01, 500.0
    tr = generate_trace(homogeneous_graph(n, rate), TINY, horizon, rng_seed=11)
    expected = rate * horizon * n * (n - 1) / 2
    assert abs(len(tr) - expected) <= 3 * math.sqrt(expected)


def test_inter_contact_times_are_exponential():
    g = sample_graph(8, RateDistribution(0.5, 0.25), rng_seed=5)
    tr = generate_trace(g, TINY, 4000.0, rng_seed=6)
    gaps = []
    for a, b in zip(*np.triu_indices(8, 1)):
        sel = (tr.node_a == a) & (tr.node_b == b)
        if sel.sum() >= 500:
            gaps.append(np.diff(tr.start[sel]) * g.rates[a, b])
    assert len(gaps) >= 10
    pooled = np.concatenate(gaps)
    assert stats.kstest(pooled, "expon").pvalue > 0.01


def test_same_pair_contacts_never_overlap():
    tr = generate_trace(homogeneous_graph(3, 0.5), DurationDistribution(5.0), 200.0, rng_seed=8)
    for a, b in [(0, 1), (0, 2), (1, 2)]:
        sel = (tr.node_a == a) & (tr.node_b == b)
        s, e = tr.start[sel], tr.end[sel]
        assert np.all(s[1:] > e[:-1])


def test_trace_sorted_and_reproducible():
    g = homogeneous_graph(6, 0.05)
    a = generate_trace(g, DurationDistribution(2.0), 100.0, rng_seed=9)
    b = generate_trace(g, DurationDistribution(2.0), 100.0, rng_seed=9)
    assert np.all(np.diff(a.start) >= 0)
    assert np.all(a.node_a < a.node_b)
    assert np.array_equal(a.start, b.start) and np.array_equal(a.node_a, b.node_a)


def test_generate_trace_rejects_bad_horizon():
    with pytest.raises(ValueError):
        generate_trace(homogeneous_graph(3, 1.0), TINY, 0.0)


def test_estimate_mean_rate_recovers_rate():
    n, rate = 30, 0.002
    tr = generate_trace(homogeneous_graph(n, rate), TINY, 5000.0, rng_seed=12)
    est = estimate_mean_rate(tr, 5000.0)
    assert est == pytest.approx(rate, rel=0.05)
    assert estimate_mean_rate(ContactTrace.empty(5, 10.0), 10.0) == 0.0
    with pytest.raises(ValueError):
        estimate_mean_rate(tr, 0.0)


# --- windows -----------------------------------------------------------------------

def small_trace():
    return ContactTrace(np.array([0, 1, 0, 2]), np.array([1, 2, 2, 3]), np.array([0.0, 5.0, 9.0, 10.0]),
                        np.array([3.0, 10.0, 0.0, 1.0]), 30.0, 4)


def test_window_clips_and_rebases():
    w = small_trace().window(8.0, 10.0)
    got = sorted(zip(w.node_a.tolist(), w.node_b.tolist(), w.start.tolist(), w.duration.tolist()))
    assert got == [(0, 2, 1.0, 0.0), (1, 2, 0.0, 7.0), (2, 3, 2.0, 1.0)]
    assert w.horizon == 10.0


def test_window_keeps_zero_duration_contact_at_start():
    w = small_trace().window(9.0, 1.0)
    assert (0, 2) in set(zip(w.node_a.tolist(), w.node_b.tolist()))


def test_window_beyond_horizon_rejected():
    with pytest.raises(ValueError):
        small_trace().window(25.0, 10.0)
    with pytest.raises(ValueError):
        small_trace().window(0.0, 0.0)


def test_trace_validation():
    with pytest.raises(ValueError):
        ContactTrace(np.array([0]), np.array([0]), np.array([0.0]), np.array([1.0]), 5.0, 2)
    with pytest.raises(ValueError):
        ContactTrace(np.array([0, 0]), np.array([1, 1]), np.array([3.0, 1.0]), np.array([1.0, 1.0]), 5.0, 2)
    with pytest.raises(ValueError):
        ContactTrace(np.array([0]), np.array([5]), np.array([0.0]), np.array([1.0]), 5.0, 2)


@given(t0=st.floats(0, 20), length=st.floats(0.1, 10))
def test_window_property(t0, length):
    tr = generate_trace(homogeneous_graph(5, 0.2), DurationDistribution(1.5), 30.0, rng_seed=3)
    w = tr.window(t0, length)
    assert np.all(w.start >= 0) and np.all(w.end <= length + 1e-12)
    assert np.all(np.diff(w.start) >= 0)
    # every contact overlapping the window is kept
    overlap = ((tr.start >= t0) & (tr.start < t0 + length)) | ((tr.start < t0) & (tr.end > t0))
    assert len(w) == int(overlap.sum())


def test_concat_traces_offsets():
    a = small_trace()
    c = concat_traces([a, a])
    assert c.horizon == 60.0
    assert len(c) == 2 * len(a)
    assert c.start[-1] == pytest.approx(40.0)
    with pytest.raises(ValueError):
        concat_traces([])


# --- trace files ------------------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    tr = generate_trace(homogeneous_graph(4, 0.1), DurationDistribution(2.0), 50.0, rng_seed=1)
    path = tmp_path / "t.csv"
    save_trace(tr, path)
    back = load_trace(path, horizon=50.0)
    assert np.array_equal(back.start, tr.start) and np.array_equal(back.duration, tr.duration)
    assert np.array_equal(back.node_a, tr.node_a) and back.n_nodes == 4


def test_load_trace_remaps_ids_and_counts_unsorted(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# comment\n\n17,4,10.0,2.0\n4,99,3.0,1.0\n")
    tr = load_trace(path)
    assert tr.n_nodes == 3
    assert tr.unsorted_rows == 1
    assert tr.start.tolist() == [3.0, 10.0]
    assert (tr.node_a.tolist(), tr.node_b.tolist()) == ([0, 0], [2, 1])
    assert tr.horizon == 12.0


@pytest.mark.parametrize("line", ["1,2,3", "1,1,0,1", "1,2,-1,1", "a,2,0,1", "1,2,0,nan"])
def test_load_trace_errors_carry_line_number(tmp_path, line):
    path = tmp_path / "bad.csv"
    path.write_text("0,1,0.0,1.0\n" + line + "\n")
    with pytest.raises(TraceParseError, match="line 2"):
        load_trace(path)


def test_empty_trace_file(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("# nothing\n")
    tr = load_trace(path)
    assert len(tr) == 0 and tr.n_nodes == 0
