"""Up-front query sampling and the observed noisy graph."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .oracle import Labeling, NoiseSpec, SIGN_FLIP, VARIANTS, canonical_responses

FIXED = "fixed"
BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class SamplingPlan:
    mode: str = BERNOULLI
    count: int | None = None
    p: float | None = None

    def __post_init__(self):
        if self.mode == FIXED:
            if self.count is None or self.count < 0:
                raise ValueError("fixed sampling needs a nonnegative query count")
        elif self.mode == BERNOULLI:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"bernoulli sampling needs p in [0, 1], got {self.p}")
        else:
            raise ValueError(f"unknown sampling mode {self.mode!r}")

    @classmethod
    def fixed(cls, count: int) -> "SamplingPlan":
        return cls(FIXED, count=int(count))

    @classmethod
    def bernoulli(cls, p: float) -> "SamplingPlan":
        return cls(BERNOULLI, p=float(p))

    @classmethod
    def complete(cls, n: int) -> "SamplingPlan":
        return cls.fixed(n * (n - 1) // 2)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "count": self.count, "p": self.p}


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def unrank_pairs(index: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map row-major indices of the strict upper triangle to ``(i, j)``, i < j."""
    t = np.asarray(index, dtype=np.int64)

    def row_start(i):
        return i * n - i * (i + 1) // 2

    b = 2 * n - 1
    i = np.floor((b - np.sqrt(np.maximum(b * b - 8.0 * t, 0.0))) / 2.0).astype(np.int64)
    i = np.clip(i, 0, max(n - 2, 0))
    # one-step corrections for float rounding at row boundaries
    i = np.where(row_start(i) > t, i - 1, i)
    i = np.where(row_start(i + 1) <= t, i + 1, i)
    return i, t - row_start(i) + i + 1


class QueryGraph:
    """Observed graph: queried pairs with their stored responses.

    Responses are stored for the canonical orientation ``lo < hi``. The CSR
    arrays hold each adjacency entry already read in the row-to-neighbor
    direction, so walking a path never needs to look orientation up.
    """

    def __init__(self, n: int, k: int, variant: str, lo, hi, values):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        lo = np.asarray(lo, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        values = np.asarray(values, dtype=np.int64)
        if not (lo.shape == hi.shape == values.shape):
            raise ValueError("edge arrays must have equal length")
        if lo.size:
            if np.any(lo == hi):
                raise ValueError("self-loops are not allowed")
            if lo.min() < 0 or max(lo.max(), hi.max()) >= n:
                raise ValueError("edge endpoint out of range")
        swap = lo > hi
        lo, hi = np.where(swap, hi, lo), np.where(swap, lo, hi)
        if variant != SIGN_FLIP:
            values = np.where(swap, (-values) % k, values)
        keys = lo * n + hi
        order = np.argsort(keys, kind="stable")
        keys, lo, hi, values = keys[order], lo[order], hi[order], values[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise ValueError("duplicate pairs")
        self.n = int(n)
        self.k = int(k)
        self.variant = variant
        self.lo, self.hi, self.values = lo, hi, values
        self.edge_count = int(lo.size)
        self.pair_map: dict[int, int] = dict(zip(keys.tolist(), values.tolist()))

        rev = values if variant == SIGN_FLIP else (-values) % k
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        val = np.concatenate([values, rev])
        order = np.lexsort((dst, src))
        self.indices = dst[order]
        self.entry_values = val[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=self.indptr[1:])
        self.degrees = np.diff(self.indptr)

    def __repr__(self):
        return f"QueryGraph(n={self.n}, k={self.k}, variant={self.variant!r}, edges={self.edge_count})"

    def neighbors(self, x: int) -> np.ndarray:
        return self.indices[self.indptr[x]:self.indptr[x + 1]]

    def has_edge(self, x: int, y: int) -> bool:
        lo, hi = (x, y) if x < y else (y, x)
        return lo * self.n + hi in self.pair_map

    def response(self, x: int, y: int) -> int:
        """Response read in the ``x -> y`` direction; KeyError if not queried."""
        if x < y:
            return self.pair_map[x * self.n + y]
        value = self.pair_map[y * self.n + x]
        return value if self.variant == SIGN_FLIP else (-value) % self.k

    def edges(self):
        return zip(self.lo.tolist(), self.hi.tolist(), self.values.tolist())

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"{self.n} {self.k} {self.variant}\n")
        for x, y, v in self.edges():
            buf.write(f"{x} {y} {v}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "QueryGraph":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n, k, variant = lines[0].split()
        rows = np.array([[int(t) for t in ln.split()] for ln in lines[1:]], dtype=np.int64).reshape(-1, 3)
        return cls(int(n), int(k), variant, rows[:, 0], rows[:, 1], rows[:, 2])


def sample_query_graph(labeling: Labeling, noise: NoiseSpec, plan: SamplingPlan, seed=None) -> QueryGraph:
    """Choose the query set up front and attach the oracle's responses.

    Bernoulli(p) is drawn as a Binomial(C(n,2), p) edge count followed by a
    uniform subset of that size, which has the same law as independent
    per-pair inclusion.
    """
    n = labeling.n
    m = pair_count(n)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    structure_ss, oracle_ss = ss.spawn(2)
    rng = np.random.default_rng(structure_ss)
    if plan.mode == FIXED:
        if plan.count > m:
            raise ValueError(f"cannot make {plan.count} distinct queries among {m} pairs")
        count = plan.count
    else:
        count = int(rng.binomial(m, plan.p)) if m else 0
    if count == m:
        index = np.arange(m, dtype=np.int64)
    else:
        index = np.sort(rng.choice(m, size=count, replace=False))
    lo, hi = unrank_pairs(index, n)
    oracle_seed = int(oracle_ss.generate_state(1, dtype=np.uint64)[0])
    values = canonical_responses(labeling, noise, oracle_seed, lo, hi)
    return QueryGraph(n, labeling.k, noise.variant, lo, hi, values)


def path_length_scale(n: int) -> float:
    """``ln n / ln ln n``; needs n >= 3."""
    if n < 3:
        raise ValueError(f"path length scale needs n >= 3, got {n}")
    return math.log(n) / math.log(math.log(n))


def budget_details(n: int, c: float, constant: float = 20.0) -> dict:
    if n < 3:
        raise ValueError(f"query budget needs n >= 3, got {n}")
    if not 0.0 < c <= 0.5:
        raise ValueError(f"gap must lie in (0, 1/2], got {c}")
    L = path_length_scale(n)
    raw = constant * n * math.log(n) * (2.0 * c) ** (-L)
    cap = pair_count(n)
    budget = min(math.ceil(raw), cap)
    return {"n": n, "c": c, "constant": constant, "L": L, "raw": raw,
            "budget": budget, "clamped": math.ceil(raw) > cap}


def query_budget(n: int, c: float, constant: float = 20.0) -> int:
    """``ceil(constant * n ln n (2c)^-L)`` clamped to C(n, 2)."""
    return budget_details(n, c, constant)["budget"]


def auto_plan(n: int, c: float, constant: float = 20.0, mode: str = BERNOULLI) -> SamplingPlan:
    budget = query_budget(n, c, constant)
    if mode == FIXED:
        return SamplingPlan.fixed(budget)
    return SamplingPlan.bernoulli(budget / pair_count(n))


def check_min_degree(graph: QueryGraph, threshold: float) -> dict:
    deg = graph.degrees
    violating = np.flatnonzero(deg < threshold)
    return {
        "min_degree": int(deg.min()) if deg.size else 0,
        "threshold": threshold,
        "violating_items": violating.tolist(),
    }
