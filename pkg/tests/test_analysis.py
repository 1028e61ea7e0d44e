from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisyclust.analysis import (
    KL, MULT_LOWER, MULT_UPPER, ChainDistribution, chain_closed_form, chain_dominance,
    chain_eigenvalues, chain_power_oracle, chernoff_tail, expected_majority_mean, k3_closed_form,
    kl_divergence, parity_prob_oracle, path_agree_prob, plurality_gap, pm_offset_dist, read_k_tail,
    simulate_read_k_family,
)


def test_agree_prob_examples():
    assert path_agree_prob(0.37, 0) == 1.0
    assert path_agree_prob(0.5, 9) == 0.5
    assert path_agree_prob(0.2, 7) == pytest.approx(0.5139968, abs=1e-12)


def test_parity_oracle_examples():
    assert parity_prob_oracle(0.0, 13) == 1.0
    assert parity_prob_oracle(1.0, 2) == 1.0
    assert parity_prob_oracle(0.3, 10) == pytest.approx(path_agree_prob(0.3, 10), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(q=st.floats(0, 1), L=st.integers(0, 80))
def test_agree_prob_equals_parity_dp(q, L):
    assert abs(path_agree_prob(q, L) - parity_prob_oracle(q, L)) <= 1e-12


def test_agree_prob_domain():
    with pytest.raises(ValueError):
        path_agree_prob(1.2, 3)
    with pytest.raises(ValueError):
        parity_prob_oracle(0.2, -1)


def test_chain_noiseless_is_point_mass():
    for k in range(3, 9):
        assert chain_closed_form(0.0, k, 17).probs.tolist() == [1.0] + [0.0] * (k - 1)


def test_chain_power_oracle_small_t():
    dist = [0.5, 0.3, 0.2]
    assert chain_power_oracle(dist, 3, 0).probs.tolist() == [1.0, 0.0, 0.0]
    assert chain_power_oracle(dist, 3, 1).probs.tolist() == pytest.approx(dist)


def test_chain_example_k5():
    a = chain_closed_form(0.4, 5, 12).probs
    b = chain_power_oracle(pm_offset_dist(0.4, 5), 5, 12).probs
    assert np.max(np.abs(a - b)) <= 1e-10


def test_chain_real_form_matches_complex_dft():
    for k in range(3, 9):
        for q in (0.1, 0.35, 0.5):
            t = 9
            lam_t = chain_eigenvalues(q, k) ** t
            m = np.arange(k)
            omega = np.exp(-2j * np.pi * np.outer(m, m) / k)
            cplx = omega @ lam_t / k
            assert np.max(np.abs(cplx.imag)) < 1e-12
            assert np.allclose(cplx.real, chain_closed_form(q, k, t).probs, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(3, 8), q=st.floats(0, 1), t=st.integers(0, 40))
def test_chain_is_a_distribution_matching_powering(k, q, t):
    a = chain_closed_form(q, k, t)
    b = chain_power_oracle(pm_offset_dist(q, k), k, t)
    assert abs(a.probs.sum() - 1) <= 1e-12
    assert np.max(np.abs(a.probs - b.probs)) <= 1e-10
    assert np.allclose(a.probs[1:], a.probs[1:][::-1])


def test_k3_explicit_form():
    for q in (0.0, 0.1, 0.3, 0.5):
        for t in (0, 1, 5, 30):
            p00, p01 = k3_closed_form(q, t)
            probs = chain_closed_form(q, 3, t).probs
            assert probs[0] == pytest.approx(p00, abs=1e-12)
            assert probs[1] == pytest.approx(p01, abs=1e-12)


def test_distribution_validation():
    with pytest.raises(ValueError):
        ChainDistribution(3, 1, np.array([0.5, 0.2, 0.2]))
    with pytest.raises(ValueError):
        chain_power_oracle([0.5, 0.6], 2, 1)
    with pytest.raises(ValueError):
        chain_closed_form(0.1, 2, 3)


def test_dominance_matches_mpmath_at_large_t():
    mpmath.mp.dps = 60
    for k, q, t in [(3, 0.4, 60), (8, 0.4, 60), (5, 0.1, 33)]:
        lam = [1 - mpmath.mpf(q) + mpmath.mpf(q) * mpmath.cos(2 * mpmath.pi * j / k) for j in range(k)]
        probs = [sum(mpmath.cos(2 * mpmath.pi * j * m / k) * lam[j] ** t for j in range(k)) / k
                 for m in range(k)]
        dom = chain_dominance(q, k, t)
        for m in range(1, k):
            assert float(probs[0] - probs[m]) == pytest.approx(dom["gaps"][m - 1], rel=1e-10)
        assert float(probs[0] - mpmath.mpf(1) / k) == pytest.approx(dom["excess"], rel=1e-10)


def test_plurality_gap_examples():
    assert plurality_gap(0.0, 4, 3)["exact"] == pytest.approx(1.0)
    assert plurality_gap(0.3, 3, 5)["exact"] == pytest.approx(0.55 ** 5, rel=1e-12)
    g = plurality_gap(0.3, 3, 5)
    assert set(g) >= {"exact", "bound", "bound_holds"}
    with pytest.raises(ValueError):
        plurality_gap(0.6, 3, 5)


def test_plurality_gap_positive_on_grid():
    for k in range(3, 9):
        for q in (0.0, 0.1, 0.2, 0.3, 0.4):
            for t in range(61):
                assert plurality_gap(q, k, t)["exact"] > 0


def test_kl_examples_and_domain():
    assert kl_divergence(0.5, 0.5) == 0.0
    mpmath.mp.dps = 40
    a, b = mpmath.mpf("0.4"), mpmath.mpf("0.3")
    ref = a * mpmath.log(a / b) + (1 - a) * mpmath.log((1 - a) / (1 - b))
    assert kl_divergence(0.4, 0.3) == pytest.approx(float(ref), rel=1e-13)
    assert kl_divergence(0.4, 0.3) != pytest.approx(kl_divergence(0.3, 0.4))
    for bad in [(0.0, 0.3), (0.4, 1.0)]:
        with pytest.raises(ValueError):
            kl_divergence(*bad)


@settings(max_examples=80, deadline=None)
@given(a=st.floats(0.01, 0.99), b=st.floats(0.01, 0.99))
def test_kl_nonnegative(a, b):
    assert kl_divergence(a, b) >= -1e-15


def test_read_k_kl_form_value():
    b = read_k_tail(1000, 10, 0.3, 0.1)
    assert b.bound == pytest.approx(math.exp(-kl_divergence(0.4, 0.3) * 100))
    assert read_k_tail(1000, 10, 0.3, 1e-9).bound == pytest.approx(1.0)
    lower = read_k_tail(1000, 10, 0.3, 0.1, tail="lower")
    assert lower.bound == pytest.approx(math.exp(-kl_divergence(0.2, 0.3) * 100))


def test_read_one_reduces_to_chernoff_forms():
    r, q, eps = 500, 0.2, 0.3
    mu = q * r
    up = read_k_tail(r, 1, q, eps, MULT_UPPER).bound
    low = read_k_tail(r, 1, q, eps, MULT_LOWER).bound
    assert up == pytest.approx(chernoff_tail(mu, eps * mu, "upper"))
    assert low == pytest.approx(chernoff_tail(mu, eps * mu, "lower"))
    assert read_k_tail(r, 5, q, eps, MULT_UPPER).bound == pytest.approx(up ** (1 / 5))


def test_read_k_domain_errors():
    with pytest.raises(ValueError):
        read_k_tail(0, 1, 0.3, 0.1)
    with pytest.raises(ValueError):
        read_k_tail(10, 1, 0.3, 0.8)
    with pytest.raises(ValueError):
        read_k_tail(10, 1, 0.3, 0.1, form="bogus")
    with pytest.raises(ValueError):
        read_k_tail(10, 1, 0.3, 0.1, tail="sideways")


@settings(max_examples=60, deadline=None)
@given(r=st.integers(1, 5000), k=st.integers(1, 50), q=st.floats(0.01, 0.98), eps=st.floats(1e-4, 0.5),
       form=st.sampled_from([KL, MULT_UPPER, MULT_LOWER]))
def test_read_k_bound_is_a_probability(r, k, q, eps, form):
    try:
        b = read_k_tail(r, k, q, eps, form)
    except ValueError:
        return
    assert 0.0 <= b.bound <= 1.0


def test_chernoff_phi_form_dominates_simple_upper():
    mu = 40.0
    for a in (1.0, 5.0, 20.0):
        assert chernoff_tail(mu, a, "upper", "phi") <= chernoff_tail(mu, a, "upper") + 1e-15


def test_expected_majority_mean():
    assert expected_majority_mean(250, 0.5, 9) == 250
    assert expected_majority_mean(40, 0.3, 0) == 40
    assert expected_majority_mean(500, 0.3, 7) == pytest.approx(13.9968)


def test_majority_mean_monte_carlo():
    rng = np.random.default_rng(3)
    N, q, L, reps = 500, 0.2, 7, 2000
    flips = (rng.random((reps, N, L)) < q).sum(axis=2)
    y = np.where(flips % 2 == 0, 1, -1).sum(axis=1)
    mean = expected_majority_mean(N, 0.5 - q, L)
    per_path_var = 1 - (1 - 2 * q) ** (2 * L)
    assert abs(y.mean() - mean) <= 3 * math.sqrt(N * per_path_var / reps)


@pytest.mark.parametrize("shape", ["blocks", "paths"])
def test_read_k_family_has_the_right_mean(shape):
    sums = simulate_read_k_family(1000, 10, 0.3, 4000, seed=0, shape=shape)
    assert sums.mean() / 1000 == pytest.approx(0.3, abs=0.01)


def test_read_k_family_rejects_ragged_sizes():
    with pytest.raises(ValueError):
        simulate_read_k_family(1001, 10, 0.3, 5, seed=0)
    with pytest.raises(ValueError):
        simulate_read_k_family(1000, 10, 0.3, 5, seed=0, shape="bogus")
