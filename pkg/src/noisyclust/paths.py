"""Almost edge-disjoint path families built from pruned BFS trees.

For a pair (u, v):

1. grow ``T_u`` from u to depth ``depth1``; the first level branches
   ``branch_first`` ways, later levels ``branch_rest`` ways;
2. grow ``T_v`` the same way, vertex-disjoint from ``T_u``;
3. prune both trees to a common shape and match their leaves by index;
4. from every matched leaf pair grow two more trees of depth ``depth2``,
   disjoint from everything built so far, and join their deepest levels
   with one queried edge.

Every path has exactly ``2 * (depth1 + depth2) + 1`` edges. Paths share
edges only inside ``T_u`` and ``T_v``; those multiplicities are reported.

Children are always taken in ascending item order, so a build is a pure
function of (graph, u, v, params).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import QueryGraph, path_length_scale


class TreeGrowthError(RuntimeError):
    def __init__(self, message: str, level: int, node: int):
        super().__init__(message)
        self.level = level
        self.node = node


class PathConstructionError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class PathParams:
    depth1: int
    depth2: int
    branch_first: int
    branch_rest: int
    min_paths: int = 1
    max_paths: int | None = None
    L: float | None = None
    epsilon: float | None = None
    shrinkage: tuple[str, ...] = ()

    def __post_init__(self):
        if self.depth1 < 1 or self.depth2 < 1:
            raise ValueError("tree depths must be at least 1")
        if self.branch_first < 1 or self.branch_rest < 1:
            raise ValueError("branching factors must be at least 1")
        if self.min_paths < 1:
            raise ValueError("min_paths must be at least 1")
        if self.max_paths is not None and self.max_paths < self.min_paths:
            raise ValueError("max_paths must be >= min_paths")

    @property
    def path_length(self) -> int:
        return 2 * (self.depth1 + self.depth2) + 1

    @property
    def leaf_count(self) -> int:
        return self.branch_first * self.branch_rest ** (self.depth1 - 1)

    def vertex_demand(self) -> int:
        return vertex_demand(self.depth1, self.depth2, self.branch_first, self.branch_rest)

    def to_dict(self) -> dict:
        return {
            "depth1": self.depth1, "depth2": self.depth2,
            "branch_first": self.branch_first, "branch_rest": self.branch_rest,
            "min_paths": self.min_paths, "max_paths": self.max_paths,
            "L": self.L, "epsilon": self.epsilon, "shrinkage": list(self.shrinkage),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PathParams":
        data = dict(data)
        data["shrinkage"] = tuple(data.get("shrinkage", ()))
        return cls(**data)

    @classmethod
    def theoretical(cls, n: int, c: float, first_level_constant: float = 4.0,
                    rest_constant: float = 4.0, min_paths: int = 1) -> "PathParams":
        """Asymptotic defaults (natural log throughout)."""
        if not 0.0 < c <= 0.5:
            raise ValueError(f"gap must lie in (0, 1/2], got {c}")
        L = path_length_scale(n)
        eps = 1.0 / math.sqrt(math.log(math.log(n)))
        ln_n = math.log(n)
        return cls(
            depth1=max(1, math.ceil(eps * L)),
            depth2=max(1, math.ceil((0.5 + eps) * L)),
            branch_first=max(1, math.ceil(first_level_constant * ln_n * (2.0 * c) ** (-L))),
            branch_rest=max(1, math.ceil(rest_constant * ln_n)),
            min_paths=min_paths, L=L, epsilon=eps,
        )

    @classmethod
    def auto(cls, n: int, c: float, graph: QueryGraph | None = None,
             first_level_constant: float = 4.0, min_paths: int = 1,
             branch_first: int | None = None) -> "PathParams":
        """Theoretical defaults shrunk until the whole structure fits in n items.

        Shrinking order: second-stage depth, first-stage depth, later-level
        branching, then first-level branching. Short paths are kept ahead of
        wide trees because the per-path signal decays geometrically with
        length. ``branch_first`` overrides the theoretical first-level width
        before shrinking. Every change is recorded in ``shrinkage``.
        """
        p = cls.theoretical(n, c, first_level_constant, min_paths=min_paths)
        notes = []
        d1, d2, f, r = p.depth1, p.depth2, p.branch_first, p.branch_rest
        if branch_first is not None:
            f = max(1, int(branch_first))
            notes.append(f"branch_first {p.branch_first}->{f} (override)")
        if graph is not None and graph.n and graph.degrees.min() < f:
            cap = max(1, int(graph.degrees.min()))
            notes.append(f"branch_first {f}->{cap} (min degree)")
            f = cap
        start = (d2, d1, r, f)
        while vertex_demand(d1, d2, f, r) > n and d2 > 1:
            d2 -= 1
        while vertex_demand(d1, d2, f, r) > n and d1 > 1:
            d1 -= 1
        while vertex_demand(d1, d2, f, r) > n and r > 1:
            r -= 1
        while vertex_demand(d1, d2, f, r) > n and f > 1:
            f -= 1
        for name, before, after in zip(("depth2", "depth1", "branch_rest", "branch_first"), start, (d2, d1, r, f)):
            if before != after:
                notes.append(f"{name} {before}->{after} (vertex budget n={n})")
        return replace(p, depth1=d1, depth2=d2, branch_first=f, branch_rest=r,
                       min_paths=min(min_paths, f * r ** (d1 - 1)), shrinkage=tuple(notes))


def vertex_demand(depth1: int, depth2: int, branch_first: int, branch_rest: int) -> int:
    """Items used by a full-width build: both first-stage trees plus two
    second-stage trees per leaf (their roots already counted)."""
    first = 1 + branch_first * sum(branch_rest ** i for i in range(depth1))
    leaves = branch_first * branch_rest ** (depth1 - 1)
    second = sum(branch_rest ** i for i in range(1, depth2 + 1))
    return 2 * first + 2 * leaves * second


@dataclass
class BfsTree:
    root: int
    levels: list[list[int]]
    parent: dict[int, int]
    children: dict[int, list[int]] = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def leaves(self) -> list[int]:
        return self.levels[-1]

    def nodes(self) -> list[int]:
        return [x for level in self.levels for x in level]

    def path_to_root(self, node: int) -> list[int]:
        out = [node]
        while node != self.root:
            node = self.parent[node]
            out.append(node)
        return out


def count_bad_edges(graph: QueryGraph, tree_nodes, candidate: int) -> int:
    """Number of the candidate's neighbors already inside ``tree_nodes``
    (a boolean mask over items, or any container of items)."""
    nbrs = graph.neighbors(candidate)
    if isinstance(tree_nodes, np.ndarray) and tree_nodes.dtype == bool:
        return int(tree_nodes[nbrs].sum())
    members = set(tree_nodes)
    return sum(1 for x in nbrs.tolist() if x in members and x != candidate)


class _Diag:
    __slots__ = ("tree_bad", "forest_bad", "expansions")

    def __init__(self):
        self.tree_bad = 0
        self.forest_bad = 0
        self.expansions = 0


def _grow(graph: QueryGraph, root: int, depth: int, first_branch: int, rest_branch: int,
          used: np.ndarray, diag: _Diag | None = None, min_leaves: int = 1) -> BfsTree:
    # ``used`` is the pair's forest plus forbidden items; updated in place
    if used[root]:
        raise ValueError(f"root {root} is forbidden")
    in_tree = np.zeros(graph.n, dtype=bool)
    in_tree[root] = True
    used[root] = True
    levels = [[root]]
    parent: dict[int, int] = {}
    children: dict[int, list[int]] = {}
    stall = None
    try:
        for level in range(1, depth + 1):
            want = first_branch if level == 1 else rest_branch
            nxt = []
            for node in levels[-1]:
                nbrs = graph.neighbors(node)
                if diag is not None:
                    diag.tree_bad = max(diag.tree_bad, int(in_tree[nbrs].sum()))
                    diag.forest_bad = max(diag.forest_bad, int(used[nbrs].sum()))
                    diag.expansions += 1
                picked = nbrs[~used[nbrs]][:want].tolist()
                if len(picked) < want and stall is None:
                    stall = (level, node)
                used[picked] = True
                in_tree[picked] = True
                children[node] = picked
                for c in picked:
                    parent[c] = node
                nxt.extend(picked)
            if not nxt:
                raise TreeGrowthError(f"tree from {root} died out at level {level}",
                                      level, stall[1] if stall else root)
            levels.append(nxt)
        if len(levels[-1]) < min_leaves:
            level, node = stall if stall else (depth, root)
            raise TreeGrowthError(
                f"tree from {root} has {len(levels[-1])} leaves, fewer than {min_leaves}", level, node)
    except TreeGrowthError:
        used[in_tree] = False
        raise
    return BfsTree(root, levels, parent, children)


def _forbidden_mask(n: int, forbidden) -> np.ndarray:
    used = np.zeros(n, dtype=bool)
    if forbidden is not None:
        idx = list(forbidden)
        if idx:
            used[idx] = True
    return used


def grow_tree(graph: QueryGraph, root: int, params: PathParams, forbidden=(),
              depth: int | None = None, first_branch: int | None = None,
              rest_branch: int | None = None) -> BfsTree:
    """Pruned BFS tree from ``root`` avoiding ``forbidden``.

    Nodes short of eligible neighbors contribute what they have (degraded
    mode); TreeGrowthError is raised only if a level empties or the leaf
    count falls below ``params.min_paths``.
    """
    used = _forbidden_mask(graph.n, forbidden)
    return _grow(graph, root,
                 params.depth1 if depth is None else depth,
                 params.branch_first if first_branch is None else first_branch,
                 params.branch_rest if rest_branch is None else rest_branch,
                 used, min_leaves=params.min_paths)


def _match_shapes(ta: BfsTree, tb: BfsTree) -> tuple[BfsTree, BfsTree]:
    """Prune two trees to a common shape; leaf i of one maps to leaf i of
    the other. Subtrees that do not reach full depth are dropped first."""
    depth = min(ta.depth, tb.depth)

    def full(tree):
        ok = {x: True for x in tree.levels[depth]} if depth < len(tree.levels) else {}
        for level in range(depth - 1, -1, -1):
            for x in tree.levels[level]:
                ok[x] = any(ok.get(c, False) for c in tree.children.get(x, []))
        return ok

    oka, okb = full(ta), full(tb)
    la, lb = [[ta.root]], [[tb.root]]
    pa, pb = {}, {}
    ca, cb = {}, {}
    if oka.get(ta.root) and okb.get(tb.root):
        for _ in range(depth):
            na, nb = [], []
            for x, y in zip(la[-1], lb[-1]):
                kx = [c for c in ta.children.get(x, []) if oka.get(c)]
                ky = [c for c in tb.children.get(y, []) if okb.get(c)]
                m = min(len(kx), len(ky))
                ca[x], cb[y] = kx[:m], ky[:m]
                for c in kx[:m]:
                    pa[c] = x
                for c in ky[:m]:
                    pb[c] = y
                na.extend(kx[:m])
                nb.extend(ky[:m])
            la.append(na)
            lb.append(nb)
    else:
        la, lb = [[ta.root]] + [[] for _ in range(depth)], [[tb.root]] + [[] for _ in range(depth)]
    return BfsTree(ta.root, la, pa, ca), BfsTree(tb.root, lb, pb, cb)


@dataclass
class PathFamily:
    u: int
    v: int
    paths: list[tuple[int, ...]]
    edge_multiplicity: dict[tuple[int, int], int]
    max_read: int
    target_read_k: int
    params: PathParams
    diagnostics: dict = field(default_factory=dict)
    first_trees: tuple[BfsTree, BfsTree] | None = field(default=None, repr=False)
    second_trees: list[tuple[BfsTree, BfsTree]] = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.paths)

    def reversed(self) -> "PathFamily":
        """The same family read from v to u."""
        return replace(self, u=self.v, v=self.u, paths=[tuple(reversed(p)) for p in self.paths])

    def dump(self) -> str:
        return "".join(" ".join(map(str, p)) + "\n" for p in self.paths)


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _cross_edge(graph: QueryGraph, xs: list[int], ys: list[int]) -> tuple[int, int] | None:
    pair_map, n = graph.pair_map, graph.n
    for x in sorted(xs):
        for y in sorted(ys):
            key = x * n + y if x < y else y * n + x
            if key in pair_map:
                return x, y
    return None


def build_path_family(graph: QueryGraph, u: int, v: int, params: PathParams) -> PathFamily:
    """Grow the two-stage tree structure for (u, v) and stitch the paths."""
    if u == v:
        raise ValueError("endpoints must differ")
    n = graph.n
    diag = _Diag()
    used = np.zeros(n, dtype=bool)
    used[v] = True
    try:
        tu = _grow(graph, u, params.depth1, params.branch_first, params.branch_rest, used, diag,
                   params.min_paths)
        used[v] = False
        tv = _grow(graph, v, params.depth1, params.branch_first, params.branch_rest, used, diag,
                   params.min_paths)
    except TreeGrowthError as exc:
        raise PathConstructionError(f"first-stage tree failed for ({u}, {v}): {exc}",
                                    {"stage": "first", "level": exc.level, "node": exc.node}) from exc

    tu, tv = _match_shapes(tu, tv)
    used[:] = False
    used[tu.nodes()] = True
    used[tv.nodes()] = True

    paths: list[tuple[int, ...]] = []
    second: list[tuple[BfsTree, BfsTree]] = []
    growth_failures = cross_failures = 0
    cap = params.max_paths
    for ui, vi in zip(tu.leaves, tv.leaves):
        if cap is not None and len(paths) >= cap:
            break
        used[ui] = False
        try:
            tx = _grow(graph, ui, params.depth2, params.branch_rest, params.branch_rest, used, diag)
        except TreeGrowthError:
            used[ui] = True
            growth_failures += 1
            continue
        used[vi] = False
        try:
            ty = _grow(graph, vi, params.depth2, params.branch_rest, params.branch_rest, used, diag)
        except TreeGrowthError:
            used[tx.nodes()] = False
            used[ui] = used[vi] = True
            growth_failures += 1
            continue
        hit = _cross_edge(graph, tx.leaves, ty.leaves)
        if hit is None:
            used[tx.nodes()] = False
            used[ty.nodes()] = False
            used[ui] = used[vi] = True
            cross_failures += 1
            continue
        x, y = hit
        path = (tu.path_to_root(ui)[::-1] + tx.path_to_root(x)[::-1][1:]
                + ty.path_to_root(y) + tv.path_to_root(vi)[1:])
        paths.append(tuple(path))
        second.append((tx, ty))

    mult = Counter(_edge(a, b) for p in paths for a, b in zip(p, p[1:]))
    width = max(1, len(tu.levels[1]) if len(tu.levels) > 1 else 1)
    diagnostics = {
        "leaf_pairs": len(tu.leaves),
        "growth_failures": growth_failures,
        "cross_edge_failures": cross_failures,
        "first_level_width": width,
        "max_bad_edges_tree": diag.tree_bad,
        "max_bad_edges_forest": diag.forest_bad,
        "expansions": diag.expansions,
    }
    if len(paths) < params.min_paths:
        raise PathConstructionError(
            f"only {len(paths)} paths for ({u}, {v}), need {params.min_paths}",
            dict(diagnostics, stage="second"))
    return PathFamily(
        u=u, v=v, paths=paths, edge_multiplicity=dict(mult),
        max_read=max(mult.values(), default=0),
        target_read_k=max(1, math.ceil(len(paths) / width)),
        params=params, diagnostics=diagnostics,
        first_trees=(tu, tv), second_trees=second,
    )
