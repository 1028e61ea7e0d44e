"""Per-pair verdicts from path families and whole-clustering recovery."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import QueryGraph
from .oracle import Labeling, NoiseSpec, SIGN_FLIP
from .paths import PathConstructionError, PathFamily, PathParams, build_path_family

ANCHORED = "anchored"
ALL_PAIRS = "all-pairs"


def _read(graph: QueryGraph, a: int, b: int) -> int:
    try:
        return graph.response(a, b)
    except KeyError:
        raise ValueError(f"({a}, {b}) is not a queried pair") from None


def path_sign(path, graph: QueryGraph) -> int:
    """Product of the edge signs along ``path``."""
    if graph.variant != SIGN_FLIP:
        raise ValueError("path_sign needs sign responses")
    sign = 1
    for a, b in zip(path, path[1:]):
        sign *= _read(graph, a, b)
    return sign


def path_difference(path, graph: QueryGraph, k: int | None = None) -> int:
    """Oriented sum of modular responses along ``path``, mod k.

    Without noise this telescopes to ``g(path[0]) - g(path[-1]) mod k``.
    """
    if graph.variant == SIGN_FLIP:
        raise ValueError("path_difference needs modular responses")
    k = graph.k if k is None else k
    total = 0
    for a, b in zip(path, path[1:]):
        total += _read(graph, a, b)
    return total % k


@dataclass
class PairVerdict:
    u: int
    v: int
    statistic: int | list[int]
    verdict: str | int
    n_paths: int
    max_read: int
    tie: bool = False

    @property
    def same(self) -> bool:
        return self.verdict == "same" or self.verdict == 0


def _plurality(counts: np.ndarray) -> tuple[int, bool]:
    k = len(counts)
    best = counts.max()
    winners = np.flatnonzero(counts == best).tolist()
    # ties: closest to 0 mod k, then the smaller value
    pick = min(winners, key=lambda d: (min(d, k - d), d))
    return pick, len(winners) > 1


def decide_pair(family: PathFamily, graph: QueryGraph, model: NoiseSpec | None = None) -> PairVerdict:
    if not family.paths:
        raise ValueError("empty path family")
    variant = graph.variant if model is None else model.variant
    if variant == SIGN_FLIP:
        y = sum(path_sign(p, graph) for p in family.paths)
        return PairVerdict(family.u, family.v, int(y), "same" if y >= 0 else "different",
                           len(family.paths), family.max_read, tie=(y == 0))
    k = graph.k
    counts = np.bincount([path_difference(p, graph, k) for p in family.paths], minlength=k)
    d, tie = _plurality(counts)
    return PairVerdict(family.u, family.v, counts.tolist(), int(d), len(family.paths),
                       family.max_read, tie=tie)


@dataclass
class Clustering:
    n: int
    k: int
    assignment: np.ndarray
    unassigned: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "assignment": [int(a) for a in self.assignment]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Clustering":
        return cls(int(data["n"]), int(data["k"]), np.asarray(data["assignment"], dtype=np.int64))


def _class_from_verdict(anchor_class: int, verdict: PairVerdict, modular: bool, k: int) -> int:
    # verdict is about (a, v): for modular responses it estimates g(a) - g(v)
    if modular:
        return (anchor_class - int(verdict.verdict)) % k
    return anchor_class if verdict.verdict == "same" else 1 - anchor_class


def recover_clusters(graph: QueryGraph, params: PathParams, model: NoiseSpec | None = None,
                     mode: str = ANCHORED, anchor: int = 0,
                     on_family=None) -> tuple[Clustering, dict]:
    """Cluster every item from pairwise verdicts.

    Anchored mode decides (anchor, v) for every other v. All-pairs mode
    decides every pair, then re-assigns each item by majority over the
    classes its verdicts imply against the anchored classes of the others.
    ``on_family`` is called with each built PathFamily (e.g. for dumping).
    """
    if graph.edge_count == 0:
        raise ValueError("query graph has no edges")
    if mode not in (ANCHORED, ALL_PAIRS):
        raise ValueError(f"unknown mode {mode!r}")
    n = graph.n
    modular = (graph.variant if model is None else model.variant) != SIGN_FLIP
    k = graph.k if modular else 2

    verdicts: dict[tuple[int, int], PairVerdict] = {}
    failures: dict[tuple[int, int], str] = {}
    path_counts, reads = [], []

    def decide(a, b):
        try:
            fam = build_path_family(graph, a, b, params)
        except PathConstructionError as exc:
            failures[(a, b)] = str(exc)
            return None
        if on_family is not None:
            on_family(fam)
        ver = decide_pair(fam, graph, model)
        verdicts[(a, b)] = ver
        path_counts.append(len(fam))
        reads.append(fam.max_read)
        return ver

    assignment = np.zeros(n, dtype=np.int64)
    unassigned = []
    for v in range(n):
        if v == anchor:
            continue
        ver = decide(anchor, v)
        if ver is None:
            unassigned.append(v)
        else:
            assignment[v] = _class_from_verdict(0, ver, modular, k)

    diagnostics = {"mode": mode, "decide_calls": len(verdicts)}
    if mode == ALL_PAIRS:
        others = [x for x in range(n) if x != anchor]
        for a, b in itertools.combinations(others, 2):
            decide(a, b)
        anchored = assignment.copy()
        bad = set(unassigned)
        inconsistent = 0
        for a, b in itertools.combinations(others, 2):
            ver = verdicts.get((a, b))
            if ver is None or a in bad or b in bad:
                continue
            if _class_from_verdict(anchored[a], ver, modular, k) != anchored[b]:
                inconsistent += 1
        resolved = anchored.copy()
        still_unassigned = []
        for v in others:
            votes = np.zeros(k, dtype=np.int64)
            if v not in bad:
                votes[anchored[v]] += 1
            for w in range(n):
                if w == v or w in bad:
                    continue
                ver = verdicts.get((w, v))
                if ver is not None:
                    votes[_class_from_verdict(anchored[w], ver, modular, k)] += 1
                    continue
                ver = verdicts.get((v, w))
                if ver is None:
                    continue
                if modular:
                    # verdict estimates g(v) - g(w)
                    votes[(anchored[w] + int(ver.verdict)) % k] += 1
                else:
                    votes[_class_from_verdict(anchored[w], ver, modular, k)] += 1
            if votes.sum() == 0:
                still_unassigned.append(v)
            else:
                resolved[v] = int(np.argmax(votes))
        assignment = resolved
        unassigned = still_unassigned
        diagnostics.update(decide_calls=len(verdicts), inconsistent_triangles=inconsistent)

    diagnostics.update(
        pairs_failed=len(failures),
        failures={f"{a}-{b}": msg for (a, b), msg in failures.items()},
        ties=sum(1 for ver in verdicts.values() if ver.tie),
        mean_paths_per_pair=float(np.mean(path_counts)) if path_counts else 0.0,
        mean_max_read=float(np.mean(reads)) if reads else 0.0,
        unassigned=list(unassigned),
    )
    return Clustering(n, k, assignment, list(unassigned)), diagnostics


def clustering_error(predicted: Clustering, truth: Labeling) -> dict:
    """Misclassified count minimized over relabelings of the predicted clusters."""
    if predicted.n != truth.n:
        raise ValueError(f"size mismatch: {predicted.n} vs {truth.n}")
    k = max(predicted.k, truth.k, int(np.max(predicted.assignment, initial=0)) + 1)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (np.asarray(predicted.assignment), truth.groups), 1)
    if k <= 7:
        best = max(sum(confusion[i, perm[i]] for i in range(k))
                   for perm in itertools.permutations(range(k)))
    else:
        rows, cols = linear_sum_assignment(-confusion)
        best = confusion[rows, cols].sum()
    wrong = int(truth.n - best)
    return {"exact": wrong == 0, "misclassified": wrong}
