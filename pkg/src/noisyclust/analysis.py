"""Closed-form probabilities and tail bounds, each with a brute-force twin.

Naming: ``*_oracle`` functions never touch the closed forms they check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def path_agree_prob(q: float, L: int) -> float:
    """Probability that a length-L path's sign product is correct:
    ``(1 + (1 - 2q)^L) / 2``."""
    if not 0.0 <= q <= 1.0 or L < 0:
        raise ValueError(f"need 0 <= q <= 1 and L >= 0, got q={q}, L={L}")
    return (1.0 + (1.0 - 2.0 * q) ** L) / 2.0


def parity_prob_oracle(q: float, L: int) -> float:
    """Even-flip probability by convolving the per-edge flip law L times."""
    if not 0.0 <= q <= 1.0 or L < 0:
        raise ValueError(f"need 0 <= q <= 1 and L >= 0, got q={q}, L={L}")
    counts = np.array([1.0])
    step = np.array([1.0 - q, q])
    for _ in range(L):
        counts = np.convolve(counts, step)
    return float(counts[0::2].sum())


@dataclass(frozen=True)
class ChainDistribution:
    k: int
    t: int
    probs: np.ndarray

    def __post_init__(self):
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-12 or np.min(self.probs) < -1e-15:
            raise ValueError("chain distribution must be a probability vector")


def chain_eigenvalues(q: float, k: int) -> np.ndarray:
    """Spectrum ``1 - q + q cos(2 pi j / k)`` of the lazy +/-1 walk on Z_k."""
    j = np.arange(k)
    return 1.0 - q + q * np.cos(2.0 * np.pi * j / k)


def chain_closed_form(q: float, k: int, t: int) -> ChainDistribution:
    """t-step law of the accumulated +/-1 noise, by spectral decomposition.

    ``p_0m = (1/k) sum_j cos(2 pi j m / k) lambda_j^t``; the sine parts
    cancel because the spectrum is symmetric in j -> k - j.
    """
    if k < 3:
        raise ValueError(f"chain closed form needs k >= 3, got {k}")
    if not 0.0 <= q <= 1.0 or t < 0:
        raise ValueError(f"need 0 <= q <= 1 and t >= 0, got q={q}, t={t}")
    lam_t = chain_eigenvalues(q, k) ** t
    m = np.arange(k)
    phase = np.cos(2.0 * np.pi * np.outer(m, m) / k)
    probs = phase @ lam_t / k
    # clip float residue below zero (entries are exact zeros at q = 0)
    probs = np.where(np.abs(probs) < 1e-15, 0.0, probs)
    return ChainDistribution(k, t, probs)


def chain_power_oracle(q_dist, k: int, t: int) -> ChainDistribution:
    """t-fold circular convolution of the single-step offset law, from 0."""
    q_dist = np.asarray(q_dist, dtype=float)
    if q_dist.shape != (k,) or np.min(q_dist) < 0 or abs(q_dist.sum() - 1.0) > 1e-12:
        raise ValueError("q_dist must be a length-k probability vector")
    probs = np.zeros(k)
    probs[0] = 1.0
    for _ in range(t):
        nxt = np.zeros(k)
        for j in range(k):
            if q_dist[j]:
                nxt += q_dist[j] * np.roll(probs, j)
        probs = nxt
    return ChainDistribution(k, t, probs)


def chain_dominance(q: float, k: int, t: int) -> dict:
    """``p_00 - p_0m`` for m = 1..k-1 and ``p_00 - 1/k``, without cancellation.

    ``p_00 - p_0m = (1/k) sum_j (1 - cos(2 pi j m / k)) lambda_j^t`` and
    ``p_00 - 1/k = (1/k) sum_{j>=1} lambda_j^t``; for q <= 1/2 every term is
    nonnegative, so tiny gaps keep full relative precision where subtracting
    two computed probabilities would not.
    """
    if k < 3:
        raise ValueError(f"need k >= 3, got {k}")
    lam_t = chain_eigenvalues(q, k) ** t
    j = np.arange(k)
    m = np.arange(1, k)
    weights = 1.0 - np.cos(2.0 * np.pi * np.outer(m, j) / k)
    return {"gaps": weights @ lam_t / k, "excess": float(lam_t[1:].sum() / k)}


def pm_offset_dist(q: float, k: int) -> np.ndarray:
    dist = np.zeros(k)
    dist[0] = 1.0 - q
    dist[1] += q / 2
    dist[k - 1] += q / 2
    return dist


def k3_closed_form(q: float, t: int) -> tuple[float, float]:
    """Explicit three-group formulas for (p_00, p_01)."""
    r = (1.0 - 1.5 * q) ** t
    return 1.0 / 3.0 + 2.0 / 3.0 * r, 1.0 / 3.0 - 1.0 / 3.0 * r


def plurality_gap(q: float, k: int, t: int) -> dict:
    """Exact ``p_00 - p_01`` next to the lower-bound expression
    ``2 (1 - cos(2 pi / k)) (1 - q + q cos(2 pi / k))^t``.

    The bound is reported, not asserted: it need not hold at every t.
    """
    if q > 0.5:
        raise ValueError(f"plurality gap is reported for q <= 1/2, got {q}")
    exact = float(chain_dominance(q, k, t)["gaps"][0])
    cos1 = math.cos(2.0 * math.pi / k)
    bound = 2.0 * (1.0 - cos1) * (1.0 - q + q * cos1) ** t
    return {"q": q, "k": k, "t": t, "exact": exact, "bound": bound, "bound_holds": exact >= bound * (1.0 - 1e-12)}


def kl_divergence(a: float, b: float) -> float:
    """Binary KL divergence ``a ln(a/b) + (1-a) ln((1-a)/(1-b))``."""
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ValueError(f"KL arguments must lie in (0, 1), got {a}, {b}")
    return a * math.log(a / b) + (1.0 - a) * math.log((1.0 - a) / (1.0 - b))


def _phi(x: float) -> float:
    if x < -1:
        return math.inf
    if x == -1:
        return 1.0
    return (1.0 + x) * math.log1p(x) - x


def chernoff_tail(mu: float, a: float, tail: str = "upper", form: str = "simple") -> float:
    """Binomial Chernoff bounds on ``P(X >= mu + a)`` / ``P(X <= mu - a)``.

    ``form="phi"`` gives ``exp(-mu phi(+-a/mu))``; ``form="simple"`` the
    relaxed ``exp(-a^2/(2 mu))`` (lower) or ``exp(-a^2/(2(mu + a/3)))`` (upper).
    """
    if mu <= 0 or a < 0:
        raise ValueError("need mu > 0 and a >= 0")
    if form == "phi":
        x = a / mu if tail == "upper" else -a / mu
        return min(1.0, math.exp(-mu * _phi(x)))
    if tail == "upper":
        return min(1.0, math.exp(-a * a / (2.0 * (mu + a / 3.0))))
    if tail == "lower":
        return min(1.0, math.exp(-a * a / (2.0 * mu)))
    raise ValueError(f"unknown tail {tail!r}")


KL = "kl"
MULT_UPPER = "multiplicative-upper"
MULT_LOWER = "multiplicative-lower"


@dataclass(frozen=True)
class TailBound:
    r: int
    k_read: int
    q: float
    epsilon: float
    form: str
    tail: str
    bound: float


def read_k_tail(r: int, k_read: int, q: float, epsilon: float, form: str = KL,
                tail: str = "upper") -> TailBound:
    """Concentration bound for the sum of r read-k indicators with mean q.

    ``kl``: ``exp(-D(q +- eps || q) r / k)`` on ``P(sum >= (q+eps) r)``
    (``tail="upper"``) or ``P(sum <= (q-eps) r)`` (``tail="lower"``).
    Multiplicative forms take ``eps`` relative to ``E[Y] = q r``.
    """
    if r < 1 or k_read < 1 or epsilon <= 0:
        raise ValueError("need r >= 1, k_read >= 1 and epsilon > 0")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if form == KL:
        target = q + epsilon if tail == "upper" else q - epsilon
        if tail not in ("upper", "lower"):
            raise ValueError(f"unknown tail {tail!r}")
        if not 0.0 < target < 1.0:
            raise ValueError(f"q {'+' if tail == 'upper' else '-'} epsilon must lie in (0, 1)")
        bound = math.exp(-kl_divergence(target, q) * r / k_read)
    elif form == MULT_UPPER:
        tail = "upper"
        mean = q * r
        bound = math.exp(-epsilon ** 2 * mean / (2.0 * k_read * (1.0 + epsilon / 3.0)))
    elif form == MULT_LOWER:
        tail = "lower"
        mean = q * r
        bound = math.exp(-epsilon ** 2 * mean / (2.0 * k_read))
    else:
        raise ValueError(f"unknown bound form {form!r}")
    return TailBound(r, k_read, q, epsilon, form, tail, min(1.0, bound))


def expected_majority_mean(N: int, c: float, L: int) -> float:
    """``E[sum of path signs] = N (2c)^L`` for N paths of length L."""
    if N < 1 or not 0.0 < c <= 0.5:
        raise ValueError("need N >= 1 and 0 < c <= 1/2")
    return N * (2.0 * c) ** L


def simulate_read_k_family(r: int, k_read: int, q: float, trials: int, seed=None,
                           shape: str = "blocks") -> np.ndarray:
    """Sums of simulated read-k indicator families with ``P(Y_j = 1) = q``.

    ``blocks``: Y_j copies shared variable ``X_{j // k}`` (strongest
    dependence allowed). ``paths``: each Y_j is the parity of one shared
    variable (read by k indicators, like a first-level tree edge) and one
    private variable; both have flip rate s with ``1 - (1-2s)^2 = 2q``.
    """
    rng = np.random.default_rng(seed)
    if r % k_read:
        raise ValueError("r must be a multiple of k_read")
    groups = r // k_read
    if shape == "blocks":
        shared = rng.random((trials, groups)) < q
        return shared.sum(axis=1) * k_read
    if shape == "paths":
        s = (1.0 - math.sqrt(1.0 - 2.0 * q)) / 2.0
        shared = rng.random((trials, groups)) < s
        private = rng.random((trials, r)) < s
        y = np.repeat(shared, k_read, axis=1) ^ private
        return y.sum(axis=1)
    raise ValueError(f"unknown family shape {shape!r}")
