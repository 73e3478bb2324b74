"""Forts: connected sets whose members have few neighbours outside.

A vacant (k-1)-fort can never be invaded by the k-rule, and on a tree the
failure of complete occupation always leaves one behind.  This module
checks forts, finds them with the red/blue colourings on rooted trees, and
searches exhaustively for small ones.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import BudgetExceeded, Inconclusive, PreconditionError
from .graph_core import Graph, RootedTree, is_connected, level_set


def is_fort(g: Graph, f: Iterable[int], k: int) -> bool:
    """Connected, and every member has at most ``k`` neighbours outside."""
    f = set(f)
    if not f:
        raise PreconditionError("a fort must be non-empty")
    if any(not 0 <= v < g.n for v in f):
        raise PreconditionError("fort vertices out of range")
    for v in f:
        if sum(1 for w in g.adjacency[v] if w not in f) > k:
            return False
    return is_connected(g, f)


@dataclass(frozen=True, eq=False)
class FortCertificate:
    vertices: frozenset[int]
    k: int
    host: Graph

    def verify(self) -> bool:
        return is_fort(self.host, self.vertices, self.k)

    def __len__(self) -> int:
        return len(self.vertices)

    def to_record(self) -> dict:
        return {"k": self.k, "vertices": sorted(self.vertices),
                "host_hash": self.host.content_hash()}

    def to_json(self) -> str:
        return json.dumps(self.to_record())

    @classmethod
    def from_record(cls, record: dict, host: Graph) -> "FortCertificate":
        if record["host_hash"] != host.content_hash():
            raise PreconditionError("certificate was issued for a different graph")
        return cls(frozenset(record["vertices"]), int(record["k"]), host)


# ---------------------------------------------------------------- red colouring


@dataclass(frozen=True)
class RedColoring:
    red: tuple[bool, ...]
    round_painted: tuple[int | None, ...]


@dataclass(frozen=True)
class RedResult:
    coloring: RedColoring
    fort: FortCertificate | None
    subtree: frozenset[int] | None

    @property
    def root_red(self) -> bool:
        return self.fort is not None


def red_rounds(t: RootedTree, k: int, closed_boundary: bool = False) -> list[float]:
    """Round in which each vertex turns red (inf if never).

    A vertex turns red once at most k-1 of its children are still uncoloured.
    With an open boundary the truncation leaves are never painted.
    """
    if k < 1:
        raise PreconditionError("k must be at least 1")
    n = t.n
    nc = t.num_children
    cs = t.child_start
    bnd = t.boundary
    rounds = [math.inf] * n
    for v in range(n - 1, -1, -1):
        c = int(nc[v])
        if bnd[v] and not closed_boundary:
            continue
        if c <= k - 1:
            rounds[v] = 1
            continue
        need = c - k + 1
        child_rounds = sorted(rounds[int(cs[v]):int(cs[v + 1])])
        r = child_rounds[need - 1]
        if r < math.inf:
            rounds[v] = r + 1
    return rounds


def red_coloring(t: RootedTree, k: int, closed_boundary: bool = False,
                 min_depth: int = 1) -> RedResult:
    """Red colouring of ``t`` rooted at its root.

    If the root turns red, returns a smallest finite witness: a (k-1)-fort
    that makes the root red even with everything outside held uncoloured.
    Otherwise returns a k-ary subtree of non-red vertices down to the
    truncation depth.  A truncation shallower than ``min_depth`` cannot
    support that conclusion and raises :class:`Inconclusive`.
    """
    rounds = red_rounds(t, k, closed_boundary)
    coloring = RedColoring(tuple(r < math.inf for r in rounds),
                           tuple(int(r) if r < math.inf else None for r in rounds))
    if rounds[0] < math.inf:
        return RedResult(coloring, _red_witness(t, k, rounds), None)
    if t.truncation_depth < min_depth:
        raise Inconclusive("truncation too shallow to certify a k-ary subtree")
    keep = []
    stack = [0]
    while stack:
        v = stack.pop()
        keep.append(v)
        if t.boundary[v]:
            continue
        good = [c for c in t.children(v) if rounds[c] == math.inf]
        # a non-red internal vertex has at least k non-red children
        stack.extend(reversed(good[:k]))
    return RedResult(coloring, None, frozenset(keep))


def _red_witness(t: RootedTree, k: int, rounds: list[float]) -> FortCertificate:
    nc = t.num_children
    size: dict[int, int] = {}

    def choose(v: int) -> list[int]:
        c = int(nc[v])
        if c <= k - 1:
            return []
        reds = [u for u in t.children(v) if rounds[u] < math.inf]
        reds.sort(key=lambda u: (size[u], u))
        return reds[:c - k + 1]

    for v in range(t.n - 1, -1, -1):
        if rounds[v] < math.inf:
            size[v] = 1 + sum(size[u] for u in choose(v))
    members, stack = [], [0]
    while stack:
        v = stack.pop()
        members.append(v)
        stack.extend(choose(v))
    return FortCertificate(frozenset(members), k - 1, t.graph)


# ---------------------------------------------------------------- blue colouring


def blue_fort(t: RootedTree, x: int, R: int, k: int) -> FortCertificate:
    """(k-1)-fort inside the first R levels below ``x``.

    Needs |L_R(x)| < (k-1) k^(R-1), or |L_R(x)| < k^R when ``x`` is the root.
    Level-R vertices are blue when they have at least k children, higher
    ones when they have at least k blue children; the non-blue component of
    ``x`` is the fort.
    """
    if R < 1:
        raise PreconditionError("R must be a positive integer")
    if k < 2:
        raise PreconditionError("blue colouring needs k >= 2")
    size = len(level_set(t, x, R))
    bound = k**R if x == t.root else (k - 1) * k ** (R - 1)
    if size >= bound:
        raise PreconditionError(f"|L_R(x)| = {size} is not below {bound}")
    blue: set[int] = set()
    levels = [level_set(t, x, r) for r in range(R + 1)]
    for v in levels[R]:
        if t.num_children[v] >= k:
            blue.add(v)
    for r in range(R - 1, -1, -1):
        for v in levels[r]:
            if sum(1 for c in t.children(v) if c in blue) >= k:
                blue.add(v)
    assert x not in blue
    members, stack = [], [x]
    depth_limit = int(t.depth[x]) + R
    while stack:
        v = stack.pop()
        members.append(v)
        if t.depth[v] < depth_limit:
            stack.extend(c for c in t.children(v) if c not in blue)
    return FortCertificate(frozenset(members), k - 1, t.graph)


# ---------------------------------------------------------------- exhaustive search


def find_min_fort(g: Graph, k: int, N: int, restrict: Iterable[int] | None = None,
                  budget: int = 20_000_000) -> FortCertificate | None:
    """Smallest k-fort with at most ``N`` vertices, or None.

    Connected sets are enumerated by extension from their smallest vertex
    (each set exactly once), size by size; ties at the smallest size go to
    the lexicographically smallest sorted vertex list.  Outdegrees always
    count the whole host graph.  A branch is abandoned once the excess
    outdegree cannot be repaired with the vertices left.
    """
    if k < 0 or N < 1:
        raise PreconditionError("need k >= 0 and N >= 1")
    allowed = set(range(g.n)) if restrict is None else set(restrict)
    adj = g.adjacency
    deg = [len(a) for a in adj]
    # in a forest each new vertex touches at most one member
    per_vertex_fix = 1 if g.is_forest else max(g.max_degree, 1)
    visited = 0

    for s in range(1, N + 1):
        found: list[tuple[int, ...]] = []

        def extend(sub: list[int], inside: dict[int, int], ext: list[int], anchor: int):
            nonlocal visited
            visited += 1
            if visited > budget:
                raise BudgetExceeded(f"fort search visited more than {budget} sets")
            excess = [deg[u] - inside[u] - k for u in sub]
            worst = max(excess)
            left = s - len(sub)
            if left == 0:
                if worst <= 0:
                    found.append(tuple(sorted(sub)))
                return
            if worst > left or sum(e for e in excess if e > 0) > left * per_vertex_fix:
                return
            ext = list(ext)
            while ext:
                w = ext.pop()
                sub_set = set(sub)
                nbhd = set()
                for u in sub:
                    nbhd.update(adj[u])
                new_ext = ext + [u for u in adj[w] if u > anchor and u in allowed
                                 and u not in sub_set and u not in nbhd and u not in ext]
                inside2 = dict(inside)
                inside2[w] = 0
                for u in adj[w]:
                    if u in inside2:
                        inside2[u] += 1
                        if u != w:
                            inside2[w] += 1
                extend(sub + [w], inside2, new_ext, anchor)

        for v in sorted(allowed):
            ext = [u for u in adj[v] if u > v and u in allowed]
            extend([v], {v: 0}, ext, v)
        if found:
            return FortCertificate(frozenset(min(found)), k, g)
    return None
