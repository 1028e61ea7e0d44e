from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisyclust.graph import (
    BERNOULLI, FIXED, QueryGraph, SamplingPlan, auto_plan, budget_details, check_min_degree,
    pair_count, path_length_scale, query_budget, sample_query_graph, unrank_pairs,
)
from noisyclust.oracle import Labeling, NoiseSpec, make_labeling


def _graph(n, plan, seed=0, noise=None, k=2):
    lab = make_labeling(n, k, seed=seed)
    return sample_query_graph(lab, noise or NoiseSpec.sign_flip(0.1), plan, seed=seed)


@pytest.mark.parametrize("n", [2, 3, 7, 50, 301])
def test_unrank_matches_row_major_upper_triangle(n):
    lo, hi = unrank_pairs(np.arange(pair_count(n)), n)
    ref_lo, ref_hi = np.triu_indices(n, 1)
    assert np.array_equal(lo, ref_lo) and np.array_equal(hi, ref_hi)


def test_unrank_large_n_edges():
    n = 200_000
    idx = np.array([0, 1, n - 2, n - 1, pair_count(n) - 1])
    lo, hi = unrank_pairs(idx, n)
    assert lo.tolist() == [0, 0, 0, 1, n - 2]
    assert hi.tolist() == [1, 2, n - 1, 2, n - 1]


def test_fixed_count_all_pairs_gives_complete_graph():
    g = _graph(5, SamplingPlan.fixed(10))
    assert g.edge_count == 10
    assert all(g.degrees == 4)


def test_fixed_count_exceeding_pairs_rejected():
    with pytest.raises(ValueError):
        _graph(5, SamplingPlan.fixed(11))


def test_bernoulli_zero_is_empty():
    g = _graph(100, SamplingPlan.bernoulli(0.0))
    assert g.edge_count == 0
    report = check_min_degree(g, 1)
    assert report["min_degree"] == 0 and len(report["violating_items"]) == 100


def test_bernoulli_edge_count_mean():
    counts = [_graph(200, SamplingPlan.bernoulli(0.3), seed=s).edge_count for s in range(50)]
    mean = 0.3 * pair_count(200)
    sigma = math.sqrt(pair_count(200) * 0.3 * 0.7 / 50)
    assert abs(np.mean(counts) - mean) <= 3 * sigma


def test_complete_graph_degree_report():
    g = _graph(10, SamplingPlan.complete(10))
    report = check_min_degree(g, 9)
    assert report["min_degree"] == 9 and report["violating_items"] == []


def test_sampling_is_deterministic():
    a = _graph(120, SamplingPlan.bernoulli(0.1), seed=4)
    b = _graph(120, SamplingPlan.bernoulli(0.1), seed=4)
    assert a.to_text() == b.to_text()


def test_graph_rejects_self_loops_and_duplicates():
    with pytest.raises(ValueError):
        QueryGraph(3, 2, "sign-flip", [0], [0], [1])
    with pytest.raises(ValueError):
        QueryGraph(3, 2, "sign-flip", [0, 1], [1, 0], [1, 1])


def test_modular_response_orientation_and_text_round_trip():
    lab = Labeling(4, 3, np.array([0, 1, 2, 0]))
    g = sample_query_graph(lab, NoiseSpec.modular_pm(0.0), SamplingPlan.complete(4), seed=1)
    assert g.response(0, 2) == (0 - 2) % 3
    assert g.response(2, 0) == (2 - 0) % 3
    again = QueryGraph.from_text(g.to_text())
    assert again.to_text() == g.to_text()
    assert again.response(2, 0) == 2
    with pytest.raises(KeyError):
        QueryGraph(4, 3, g.variant, [0], [1], [1]).response(0, 2)


def test_positive_edge_density_matches_planted_bisection():
    n, q = 400, 0.2
    p = 0.2
    lab = make_labeling(n, 2, sizes=[200, 200], seed=0)
    g = sample_query_graph(lab, NoiseSpec.sign_flip(q), SamplingPlan.bernoulli(p), seed=0)
    lo, hi, vals = g.lo, g.hi, g.values
    same = lab.groups[lo] == lab.groups[hi]
    n_same, n_diff = 2 * pair_count(200), 200 * 200
    pos_same = np.sum(same & (vals == 1)) / n_same
    pos_diff = np.sum(~same & (vals == 1)) / n_diff
    assert pos_same == pytest.approx(p * (1 - q), abs=4 * math.sqrt(p * (1 - q) / n_same))
    assert pos_diff == pytest.approx(p * q, abs=4 * math.sqrt(p * q / n_diff))


def test_path_length_scale_and_frozen_reference():
    mpmath.mp.dps = 40
    ref = mpmath.log(10**4) / mpmath.log(mpmath.log(10**4))
    assert path_length_scale(10**4) == pytest.approx(float(ref), rel=1e-14)
    assert path_length_scale(10**4) == pytest.approx(4.148191, abs=5e-7)
    with pytest.raises(ValueError):
        path_length_scale(2)


def test_budget_matches_arbitrary_precision():
    mpmath.mp.dps = 40
    n, c = 10**4, mpmath.mpf("0.45")
    L = mpmath.log(n) / mpmath.log(mpmath.log(n))
    want = int(mpmath.ceil(20 * n * mpmath.log(n) * (2 * c) ** (-L)))
    assert query_budget(n, 0.45) == want


def test_budget_zero_noise_limit_and_clamp():
    assert query_budget(1000, 0.5) == math.ceil(20 * 1000 * math.log(1000))
    assert query_budget(50, 0.1) == pair_count(50)
    assert budget_details(50, 0.1)["clamped"]


def test_budget_domain():
    with pytest.raises(ValueError):
        query_budget(2, 0.3)
    with pytest.raises(ValueError):
        query_budget(100, 0.0)


def test_auto_plan_modes():
    b = query_budget(2000, 0.35)
    assert auto_plan(2000, 0.35, mode=FIXED) == SamplingPlan.fixed(b)
    plan = auto_plan(2000, 0.35, mode=BERNOULLI)
    assert plan.mode == BERNOULLI and plan.p == pytest.approx(b / pair_count(2000))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 60), frac=st.floats(0, 1), seed=st.integers(0, 10**6))
def test_fixed_count_graph_is_simple_with_exact_size(n, frac, seed):
    count = int(frac * pair_count(n))
    g = _graph(n, SamplingPlan.fixed(count), seed=seed)
    assert g.edge_count == count
    assert np.all(g.lo < g.hi)
    keys = g.lo * n + g.hi
    assert len(np.unique(keys)) == count
    assert int(g.degrees.sum()) == 2 * count
    for x in range(n):
        nb = g.neighbors(x)
        assert np.all(np.diff(nb) > 0)
        assert all(g.has_edge(x, int(y)) for y in nb)
