"""Ground-truth labelings and noisy pairwise query oracles.

Two response laws are supported:

* sign responses (two clusters): +1 for "same cluster", -1 for "different",
  flipped with probability ``q``;
* modular responses (k clusters): the group difference ``g(x) - g(y) mod k``
  perturbed by an i.i.d. offset ``j`` drawn with probability ``q_j``.

Every pair's randomness is a pure function of ``(seed, min(x, y), max(x, y))``
so a response never depends on the order in which pairs are queried.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SIGN_FLIP = "sign-flip"
MODULAR_PM = "modular-pm"
MODULAR_GENERAL = "modular-general"
VARIANTS = (SIGN_FLIP, MODULAR_PM, MODULAR_GENERAL)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps by design
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def pair_uniforms(seed: int, a, b) -> np.ndarray:
    """Uniform [0, 1) draws keyed by ``(seed, min(a, b), max(a, b))``."""
    a = np.atleast_1d(np.asarray(a, dtype=np.int64))
    b = np.atleast_1d(np.asarray(b, dtype=np.int64))
    lo = np.minimum(a, b).astype(np.uint64)
    hi = np.maximum(a, b).astype(np.uint64)
    with np.errstate(over="ignore"):
        s = _mix64(np.full(lo.shape, np.uint64(seed & 0xFFFFFFFFFFFFFFFF)) + _GOLDEN)
        h = _mix64(s ^ (lo * _GOLDEN + np.uint64(1)))
        h = _mix64(h ^ (hi * _M1 + np.uint64(2)))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class Labeling:
    """Assignment of ``n`` items to groups ``0..k-1``."""

    n: int
    k: int
    groups: np.ndarray = field(repr=False)

    def __post_init__(self):
        groups = np.array(self.groups, dtype=np.int64)
        if self.n < 1 or self.k < 2:
            raise ValueError(f"need n >= 1 and k >= 2, got n={self.n}, k={self.k}")
        if groups.shape != (self.n,):
            raise ValueError(f"groups must have length {self.n}, got {groups.shape}")
        if groups.size and (groups.min() < 0 or groups.max() >= self.k):
            raise ValueError(f"group ids must lie in [0, {self.k - 1}]")
        groups.setflags(write=False)
        object.__setattr__(self, "groups", groups)

    def sizes(self) -> list[int]:
        return np.bincount(self.groups, minlength=self.k).tolist()

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "groups": self.groups.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Labeling":
        return cls(int(data["n"]), int(data["k"]), np.asarray(data["groups"], dtype=np.int64))

    @classmethod
    def from_json(cls, text: str) -> "Labeling":
        return cls.from_dict(json.loads(text))


def make_labeling(n: int, k: int = 2, sizes: Sequence[int] | None = None, seed=None) -> Labeling:
    """Random labeling; with ``sizes`` the group sizes are fixed and the
    items are shuffled, otherwise each item's group is uniform."""
    if n < 1 or k < 2:
        raise ValueError(f"need n >= 1 and k >= 2, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    if sizes is None:
        groups = rng.integers(0, k, size=n)
    else:
        sizes = [int(s) for s in sizes]
        if len(sizes) != k or any(s < 0 for s in sizes) or sum(sizes) != n:
            raise ValueError(f"sizes {sizes} must be {k} nonnegative counts summing to {n}")
        groups = rng.permutation(np.repeat(np.arange(k), sizes))
    return Labeling(n, k, groups)


def balanced_sizes(n: int, k: int) -> list[int]:
    base, extra = divmod(n, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption law of the oracle.

    ``q`` is the corruption probability for the sign and +/-1 modular
    variants. ``q_dist`` is the offset distribution ``(q_0, ..., q_{k-1})``
    of the general modular variant.
    """

    variant: str
    q: float = 0.0
    q_dist: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown noise variant {self.variant!r}")
        if self.variant == MODULAR_GENERAL:
            if self.q_dist is None:
                raise ValueError("modular-general noise needs q_dist")
            dist = tuple(float(x) for x in self.q_dist)
            if len(dist) < 2 or min(dist) < 0 or abs(sum(dist) - 1.0) > 1e-9:
                raise ValueError(f"q_dist must be a probability vector, got {dist}")
            object.__setattr__(self, "q_dist", dist)
            object.__setattr__(self, "q", 1.0 - dist[0])
        elif not 0.0 <= self.q < 0.5:
            raise ValueError(f"corruption probability must lie in [0, 1/2), got {self.q}")

    @classmethod
    def sign_flip(cls, q: float) -> "NoiseSpec":
        return cls(SIGN_FLIP, q)

    @classmethod
    def modular_pm(cls, q: float) -> "NoiseSpec":
        return cls(MODULAR_PM, q)

    @classmethod
    def modular_general(cls, q_dist: Sequence[float]) -> "NoiseSpec":
        return cls(MODULAR_GENERAL, q_dist=tuple(q_dist))

    @property
    def modular(self) -> bool:
        return self.variant != SIGN_FLIP

    @property
    def gap(self) -> float:
        """``1/2 - q``; for the general variant ``q`` is the total off-zero mass."""
        return 0.5 - self.q

    def offset_dist(self, k: int) -> np.ndarray:
        """Single-edge offset distribution over ``0..k-1`` (modular variants)."""
        if self.variant == SIGN_FLIP:
            raise ValueError("sign-flip noise has no modular offset distribution")
        if self.variant == MODULAR_GENERAL:
            if len(self.q_dist) != k:
                raise ValueError(f"q_dist has length {len(self.q_dist)}, expected k={k}")
            return np.asarray(self.q_dist)
        dist = np.zeros(k)
        dist[0] += 1.0 - self.q
        dist[1 % k] += self.q / 2
        dist[-1 % k] += self.q / 2
        return dist

    def to_dict(self) -> dict:
        d = {"variant": self.variant, "q": self.q}
        if self.q_dist is not None:
            d["q_dist"] = list(self.q_dist)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        if data["variant"] == MODULAR_GENERAL:
            return cls.modular_general(data["q_dist"])
        return cls(data["variant"], float(data["q"]))


def canonical_responses(labeling: Labeling, noise: NoiseSpec, seed: int, lo, hi) -> np.ndarray:
    """Responses for pairs stored in canonical orientation ``lo < hi``.

    Sign responses are read the same way in both directions; modular
    responses are ``g(lo) - g(hi) + offset`` and negate when read backwards.
    """
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    u = pair_uniforms(seed, lo, hi)
    g = labeling.groups
    if noise.variant == SIGN_FLIP:
        truth = np.where(g[lo] == g[hi], 1, -1)
        return np.where(u < noise.q, -truth, truth).astype(np.int64)
    k = labeling.k
    cdf = np.cumsum(noise.offset_dist(k))
    # offset k-1 is the -1 step
    offset = np.minimum(np.searchsorted(cdf, u, side="right"), k - 1)
    return ((g[lo] - g[hi] + offset) % k).astype(np.int64)


def reverse_response(value: int, noise_or_variant, k: int) -> int:
    """Read a stored response against its orientation."""
    variant = getattr(noise_or_variant, "variant", noise_or_variant)
    if variant == SIGN_FLIP:
        return value
    return (-value) % k


class NoisyOracle:
    """Answers pairwise queries; each unordered pair is answered once and
    the answer is replayed on every later query."""

    def __init__(self, labeling: Labeling, noise: NoiseSpec, seed: int = 0):
        if noise.variant == MODULAR_GENERAL:
            noise.offset_dist(labeling.k)
        self.labeling = labeling
        self.noise = noise
        self.seed = int(seed)
        self._cache: dict[tuple[int, int], int] = {}

    def __len__(self):
        return len(self._cache)

    def stored(self, x: int, y: int) -> int:
        """Canonical (``min -> max``) response for the pair."""
        lo, hi = (x, y) if x < y else (y, x)
        key = (lo, hi)
        value = self._cache.get(key)
        if value is None:
            value = int(canonical_responses(self.labeling, self.noise, self.seed, [lo], [hi])[0])
            value = self._cache.setdefault(key, value)
        return value

    def query(self, x: int, y: int) -> int:
        n = self.labeling.n
        if x == y:
            raise ValueError(f"cannot query an item against itself ({x})")
        if not (0 <= x < n and 0 <= y < n):
            raise ValueError(f"items must lie in [0, {n - 1}], got ({x}, {y})")
        value = self.stored(x, y)
        if x > y:
            value = reverse_response(value, self.noise, self.labeling.k)
        return value


def query(labeling: Labeling, noise: NoiseSpec, x: int, y: int, oracle_seed: int = 0) -> int:
    """One-shot query without a cache object; same answer as
    ``NoisyOracle(labeling, noise, oracle_seed).query(x, y)``."""
    return NoisyOracle(labeling, noise, oracle_seed).query(x, y)
