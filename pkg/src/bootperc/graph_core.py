"""Graph and rooted-tree containers plus the generators used throughout.

Trees are stored as parent arrays in breadth-first order: vertex 0 is the
root, ``parent[v] < v`` and the parent sequence is non-decreasing, so the
children of every vertex form a contiguous id range and every level is a
contiguous block.  All randomness goes through numpy's PCG64 bit generator;
substreams are derived with :class:`numpy.random.SeedSequence` spawn keys.
"""
from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import PreconditionError

TREE_MODES = ("d_ary", "d_plus_1_regular")
SEED_MAX = 2**64 - 1


# ---------------------------------------------------------------- graphs


@dataclass(frozen=True, eq=False)
class Graph:
    """Finite simple undirected graph with sorted adjacency lists.

    ``boundary`` is an optional marked vertex set (used by the grid generator
    to hand the caller the vertices it may want to pre-occupy).
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    boundary: frozenset[int] = field(default_factory=frozenset)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]],
                   boundary: Iterable[int] = ()) -> "Graph":
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise PreconditionError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise PreconditionError(f"edge ({u}, {v}) out of range for n={n}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        adj = tuple(tuple(sorted(s)) for s in nbrs)
        return cls(n, adj, frozenset(boundary))

    def validate(self) -> None:
        if len(self.adjacency) != self.n:
            raise PreconditionError("adjacency length differs from n")
        for v, row in enumerate(self.adjacency):
            if list(row) != sorted(set(row)):
                raise PreconditionError(f"adjacency of {v} is unsorted or has duplicates")
            for w in row:
                if w == v:
                    raise PreconditionError(f"self-loop at vertex {v}")
                if not 0 <= w < self.n:
                    raise PreconditionError(f"neighbor {w} of {v} out of range")
                if v not in self.adjacency[w]:
                    raise PreconditionError(f"edge ({v}, {w}) is not symmetric")

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def max_degree(self) -> int:
        return max((len(r) for r in self.adjacency), default=0)

    @cached_property
    def num_edges(self) -> int:
        return sum(len(r) for r in self.adjacency) // 2

    def edges(self) -> Iterator[tuple[int, int]]:
        for u, row in enumerate(self.adjacency):
            for v in row:
                if u < v:
                    yield u, v

    @cached_property
    def is_forest(self) -> bool:
        # a graph is a forest iff edges = vertices - components
        return self.num_edges == self.n - len(connected_components(self, range(self.n)))

    def induced(self, vertices: Iterable[int]) -> tuple["Graph", list[int]]:
        """Induced subgraph on ``vertices``; returns it with the new->old id map."""
        old = sorted(set(vertices))
        index = {v: i for i, v in enumerate(old)}
        adj = tuple(tuple(index[w] for w in self.adjacency[v] if w in index) for v in old)
        return Graph(len(old), adj), old

    def content_hash(self) -> str:
        h = hashlib.sha256(f"n={self.n};".encode())
        for u, v in self.edges():
            h.update(f"{u}-{v},".encode())
        return h.hexdigest()


def connected_components(g: Graph, vertices: Iterable[int]) -> list[list[int]]:
    """Components of the subgraph induced by ``vertices`` (each sorted)."""
    remaining = set(vertices)
    comps = []
    while remaining:
        start = min(remaining)
        remaining.discard(start)
        comp, stack = [start], [start]
        while stack:
            v = stack.pop()
            for w in g.adjacency[v]:
                if w in remaining:
                    remaining.discard(w)
                    comp.append(w)
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph, vertices: Iterable[int]) -> bool:
    vs = set(vertices)
    return len(vs) > 0 and len(connected_components(g, vs)) == 1


# ---------------------------------------------------------------- trees


@dataclass(frozen=True, eq=False)
class RootedTree:
    """Rooted tree in breadth-first parent-array form.

    ``truncation_depth`` marks the horizon: vertices at exactly that depth
    are boundary leaves standing in for the rest of an infinite tree.  It
    defaults to the maximum depth.  ``original`` optionally flags vertices
    of a subdivided tree that belong to the unsubdivided tree.
    """

    parent: np.ndarray
    truncation_depth: int | None = None
    original: np.ndarray | None = None

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        n = parent.size
        if n == 0 or parent[0] != -1:
            raise PreconditionError("vertex 0 must be the root (parent -1)")
        rest = parent[1:]
        if np.any(rest < 0) or np.any(rest >= np.arange(1, n)):
            raise PreconditionError("parent-list must satisfy 0 <= parent[v] < v")
        if np.any(np.diff(rest) < 0):
            raise PreconditionError("parent-list must be in breadth-first order "
                                    "(non-decreasing parents)")
        depth = _depths_bfs(parent)
        max_depth = int(depth[-1])
        trunc = max_depth if self.truncation_depth is None else int(self.truncation_depth)
        if trunc < max_depth:
            raise PreconditionError("truncation depth below the deepest vertex")
        child_start = np.searchsorted(rest, np.arange(n + 1), side="left") + 1
        level_start = np.searchsorted(depth, np.arange(max_depth + 2), side="left")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "truncation_depth", trunc)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "child_start", child_start)
        object.__setattr__(self, "level_start", level_start)
        if self.original is not None:
            object.__setattr__(self, "original", np.asarray(self.original, dtype=bool))

    @classmethod
    def from_parents(cls, parents: Sequence[int], truncation_depth: int | None = None,
                     original=None) -> "RootedTree":
        return cls(np.asarray(parents, dtype=np.int64), truncation_depth, original)

    root = 0

    @property
    def n(self) -> int:
        return int(self.parent.size)

    @property
    def max_depth(self) -> int:
        return int(self.depth[-1])

    @cached_property
    def num_children(self) -> np.ndarray:
        return np.diff(self.child_start)

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.depth == self.truncation_depth

    def children(self, v: int) -> range:
        return range(int(self.child_start[v]), int(self.child_start[v + 1]))

    def level(self, r: int) -> range:
        if r < 0 or r > self.max_depth:
            return range(0)
        return range(int(self.level_start[r]), int(self.level_start[r + 1]))

    @cached_property
    def graph(self) -> Graph:
        n = self.n
        adj: list[list[int]] = [[] for _ in range(n)]
        for v in range(1, n):
            adj[int(self.parent[v])].append(v)
        for v in range(1, n):
            # parent id is smaller than every child id, so prepend keeps order
            adj[v].insert(0, int(self.parent[v]))
        return Graph(n, tuple(tuple(r) for r in adj))

    def edges(self) -> Iterator[tuple[int, int]]:
        """Tree edges as (parent, child) pairs."""
        for v in range(1, self.n):
            yield int(self.parent[v]), v

    def ancestors(self, v: int) -> list[int]:
        out = []
        while v > 0:
            v = int(self.parent[v])
            out.append(v)
        return out

    def subtree(self, x: int) -> list[int]:
        """All descendants of ``x`` including ``x``."""
        out, lo, hi = [], x, x + 1
        while lo < hi:
            out.extend(range(lo, hi))
            lo, hi = int(self.child_start[lo]), int(self.child_start[hi])
        return out

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.num_children == 0)

    def restrict(self, keep: Iterable[int]) -> tuple["RootedTree", np.ndarray]:
        """Subtree induced by an ancestor-closed vertex set containing the root.

        Returns the relabelled tree and the new->old id map.  Sorting a subset
        of a breadth-first labelling keeps it breadth-first.
        """
        old = np.array(sorted(set(int(v) for v in keep)), dtype=np.int64)
        if old.size == 0 or old[0] != 0:
            raise PreconditionError("kept set must contain the root")
        index = np.full(self.n, -1, dtype=np.int64)
        index[old] = np.arange(old.size)
        par = self.parent[old[1:]]
        if np.any(index[par] < 0):
            raise PreconditionError("kept set is not closed under taking parents")
        new_parent = np.concatenate(([-1], index[par]))
        orig = None if self.original is None else self.original[old]
        return RootedTree(new_parent, self.truncation_depth, orig), old

    def validate(self) -> None:
        """Re-check the structural invariants (cheap; used by tests)."""
        g = self.graph
        g.validate()
        assert g.num_edges == self.n - 1
        assert int(self.parent[0]) == -1
        d = self.depth
        assert np.all(d[1:] == d[self.parent[1:]] + 1)


def _depths_bfs(parent: np.ndarray) -> np.ndarray:
    depth = np.zeros(parent.size, dtype=np.int64)
    # parents are non-decreasing, so each level is the block of vertices
    # whose parents lie in the previous block
    rest = parent[1:]
    hi, d = 1, 0
    while hi < parent.size:
        nxt = int(np.searchsorted(rest, hi, side="left")) + 1
        d += 1
        depth[hi:nxt] = d
        hi = nxt
    return depth


def _grow(first_counts: np.ndarray, count_fn, depth: int) -> np.ndarray:
    """Build a breadth-first parent array level by level.

    ``count_fn(level, ids)`` returns the child count of each vertex in
    ``ids`` (the vertices of ``level``); it is not called for the last level.
    """
    parents = [np.array([-1], dtype=np.int64)]
    level_ids = np.array([0], dtype=np.int64)
    next_id = 1
    for lev in range(depth):
        counts = first_counts if lev == 0 else count_fn(lev, level_ids)
        counts = np.asarray(counts, dtype=np.int64)
        kids = np.repeat(level_ids, counts)
        if kids.size == 0:
            break
        parents.append(kids)
        level_ids = np.arange(next_id, next_id + kids.size, dtype=np.int64)
        next_id += kids.size
    return np.concatenate(parents)


# ---------------------------------------------------------------- randomness


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise PreconditionError("seed must be a 64-bit unsigned integer")
    return seed


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(seed)


@dataclass(frozen=True)
class OffspringDistribution:
    """Finite-support offspring law, atoms sorted by value."""

    atoms: tuple[tuple[int, float], ...]

    def __post_init__(self):
        atoms = tuple(sorted((int(j), float(q)) for j, q in self.atoms))
        js = [j for j, _ in atoms]
        if not atoms:
            raise PreconditionError("offspring distribution needs at least one atom")
        if len(set(js)) != len(js):
            raise PreconditionError("offspring atoms must have distinct values")
        if any(j < 0 for j in js) or any(not 0.0 <= q <= 1.0 for _, q in atoms):
            raise PreconditionError("atoms need j >= 0 and probabilities in [0, 1]")
        if abs(math.fsum(q for _, q in atoms) - 1.0) > 1e-12:
            raise PreconditionError("offspring probabilities must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def point_mass(cls, j: int) -> "OffspringDistribution":
        return cls(((j, 1.0),))

    @classmethod
    def parse(cls, text: str) -> "OffspringDistribution":
        """Parse ``"j:prob,j:prob"``; renormalises sums within 1e-9 of 1."""
        pairs = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            try:
                j, q = part.split(":")
                pairs.append((int(j), float(q)))
            except ValueError as exc:
                raise PreconditionError(f"bad atom {part!r}; expected j:prob") from exc
        total = math.fsum(q for _, q in pairs)
        if abs(total - 1.0) > 1e-9:
            raise PreconditionError(f"probabilities sum to {total}, not 1")
        return cls(tuple((j, q / total) for j, q in pairs))

    def format(self) -> str:
        return ",".join(f"{j}:{q:.12g}" for j, q in self.atoms)

    @property
    def values(self) -> np.ndarray:
        return np.array([j for j, _ in self.atoms], dtype=np.int64)

    @property
    def probs(self) -> np.ndarray:
        return np.array([q for _, q in self.atoms])

    def mean(self) -> float:
        return math.fsum(j * q for j, q in self.atoms)

    def prob_below(self, k: int) -> float:
        return math.fsum(q for j, q in self.atoms if j < k)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws, one uniform per sample, in order."""
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        u = rng.random(size)
        return self.values[np.searchsorted(cum, u, side="right")]


# ---------------------------------------------------------------- generators


def gen_regular_tree(d: int, depth: int, rooted_arity: str = "d_ary") -> RootedTree:
    """Complete tree truncated at ``depth``.

    ``d_ary``: every internal vertex has d children.  ``d_plus_1_regular``:
    the root has d+1 children, so every internal vertex has degree d+1.
    """
    if d < 2:
        raise PreconditionError("regular trees need d >= 2")
    if depth < 0:
        raise PreconditionError("depth must be non-negative")
    if rooted_arity not in TREE_MODES:
        raise PreconditionError(f"rooted_arity must be one of {TREE_MODES}")
    root_kids = d + 1 if rooted_arity == "d_plus_1_regular" else d
    parent = _grow(np.array([root_kids]), lambda lev, ids: np.full(ids.size, d), depth)
    return RootedTree(parent, depth)


def gen_path_tree(depth: int) -> RootedTree:
    """A single ray of ``depth`` edges."""
    return RootedTree(np.arange(-1, depth, dtype=np.int64), depth)


def gen_subdivided_tree(d: int, depth: int) -> RootedTree:
    """(d+1)-regular tree of ``depth`` levels with every edge subdivided.

    The result has depth ``2 * depth``; ``original`` flags the vertices of
    the unsubdivided tree (exactly the even-depth vertices).
    """
    if d < 2:
        raise PreconditionError("subdivided trees need d >= 2")
    if depth < 0:
        raise PreconditionError("depth must be non-negative")

    def counts(lev, ids):
        return np.full(ids.size, 1 if lev % 2 == 1 else d)

    parent = _grow(np.array([d + 1]), counts, 2 * depth)
    tree = RootedTree(parent, 2 * depth)
    return RootedTree(parent, 2 * depth, original=(tree.depth % 2 == 0))


def gen_gw_tree(dist: OffspringDistribution, depth: int, seed) -> RootedTree:
    """Galton-Watson tree truncated at ``depth``.

    Child counts are drawn level by level in breadth-first vertex order, one
    uniform per vertex, so the shape is a pure function of (dist, depth, seed).
    ``seed`` may also be a ready ``numpy.random.Generator``.
    """
    if depth < 0:
        raise PreconditionError("depth must be non-negative")
    rng = _as_rng(seed)
    first = dist.sample(rng, 1) if depth > 0 else np.array([0])
    parent = _grow(first, lambda lev, ids: dist.sample(rng, ids.size), depth)
    return RootedTree(parent, depth)


def gen_greedy_fortfree_tree(N: int, depth: int) -> RootedTree:
    """Max-degree-3 tree with as many degree-2 vertices as allowed.

    The root has two children; every other internal vertex has two children
    unless it is made unary ("degree two").  Levels are filled top-down and,
    within a level, left to right: a vertex becomes unary whenever doing so
    creates no 1-fort of at most ``N`` interior vertices given everything
    decided so far.
    """
    if N < 1 or depth < 1:
        raise PreconditionError("need N >= 1 and depth >= 1")
    inf = math.inf
    parent: list[int] = [-1]
    unary: list[bool] = [False]
    kids: list[list[int]] = [[]]
    # f[v]: fewest vertices of a fort piece hanging below v when v's parent is
    # inside; inf while v or its subtree is undecided or on the boundary
    f: list[float] = [inf]
    level = [0]

    def top_size(t: int, fv: dict[int, float]) -> float:
        vals = [fv.get(c, f[c]) for c in kids[t]]
        if not vals:
            return inf
        return 1 + (min(vals) if t == 0 else sum(vals))

    for lev in range(1, depth + 1):
        new_level = []
        for v in level:
            for _ in range(1 if unary[v] else 2):
                c = len(parent)
                parent.append(v)
                unary.append(False)
                kids.append([])
                f.append(inf)
                kids[v].append(c)
                new_level.append(c)
        level = new_level
        if lev == depth:
            break
        for v in level:
            # tentatively make v unary and propagate f upwards
            trial = {v: 1.0}
            u, child = parent[v], v
            while u >= 0:
                if u == 0:
                    break
                if unary[u]:
                    val = 1.0
                else:
                    val = 1 + min(trial.get(c, f[c]) for c in kids[u])
                if val == f[u]:
                    break
                trial[u] = val
                child, u = u, parent[u]
            worst = min(top_size(t, trial) for t in [parent[v]] + _ancestors(parent, parent[v]))
            if worst <= N:
                continue
            unary[v] = True
            for w, val in trial.items():
                f[w] = val
    return RootedTree(np.array(parent, dtype=np.int64), depth)


def _ancestors(parent: list[int], v: int) -> list[int]:
    out = []
    while v > 0:
        v = parent[v]
        out.append(v)
    return out


def gen_grid(n: int, filled_boundary: bool = False) -> Graph:
    """n x n box with nearest-neighbour edges; vertex (i, j) has id i*n + j."""
    if n < 2:
        raise PreconditionError("grid needs n >= 2")
    edges = []
    for i in range(n):
        for j in range(n):
            v = i * n + j
            if j + 1 < n:
                edges.append((v, v + 1))
            if i + 1 < n:
                edges.append((v, v + n))
    rim = ()
    if filled_boundary:
        rim = [i * n + j for i in range(n) for j in range(n)
               if i in (0, n - 1) or j in (0, n - 1)]
    return Graph.from_edges(n * n, edges, rim)


def level_set(tree: RootedTree, x: int, r: int) -> list[int]:
    """Descendants of ``x`` exactly ``r`` levels below it."""
    if not 0 <= x < tree.n:
        raise PreconditionError(f"vertex {x} not in tree")
    if r < 0:
        raise PreconditionError("r must be non-negative")
    lo, hi = x, x + 1
    for _ in range(r):
        lo, hi = int(tree.child_start[lo]), int(tree.child_start[hi])
        if lo == hi:
            break
    return list(range(lo, hi))


# ---------------------------------------------------------------- parent-list I/O

HEADER = "# bootperc parent-list v1"


def dumps_parent_list(tree: RootedTree) -> str:
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    buf.write(f"# truncation_depth {tree.truncation_depth}\n")
    for p in tree.parent:
        buf.write(f"{int(p)}\n")
    return buf.getvalue()


def loads_parent_list(text: str) -> RootedTree:
    """Inverse of :func:`dumps_parent_list`.

    Lines starting with ``#`` are comments except ``# truncation_depth N``.
    Line i (ignoring comments and blanks) is the parent of vertex i.
    """
    parents, trunc = [], None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "truncation_depth":
                trunc = int(parts[1])
            continue
        parents.append(int(line))
    return RootedTree.from_parents(parents, trunc)


def write_parent_list(tree: RootedTree, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_parent_list(tree))


def read_parent_list(path: str | PathLike) -> RootedTree:
    with open(path) as fh:
        return loads_parent_list(fh.read())
