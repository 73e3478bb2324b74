"""k-neighbour bootstrap dynamics on finite graphs.

The engine runs synchronous rounds but only re-examines neighbours of the
vertices occupied in the previous round, so a full run costs O(edges).
Boundary handling is left to the caller through the initial configuration.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .errors import BootpercError, PreconditionError
from .graph_core import Graph, connected_components, is_connected


@dataclass(frozen=True)
class SiteConfig:
    """Set of occupied vertices of an ``n``-vertex graph."""

    n: int
    occupied: frozenset[int]

    @classmethod
    def from_iter(cls, n: int, occupied: Iterable[int] = ()) -> "SiteConfig":
        occ = frozenset(int(v) for v in occupied)
        if any(not 0 <= v < n for v in occ):
            raise PreconditionError("occupied vertex out of range")
        return cls(n, occ)

    @classmethod
    def empty(cls, n: int) -> "SiteConfig":
        return cls(n, frozenset())

    @classmethod
    def full(cls, n: int) -> "SiteConfig":
        return cls(n, frozenset(range(n)))

    def __contains__(self, v) -> bool:
        return v in self.occupied

    def __len__(self) -> int:
        return len(self.occupied)

    def __le__(self, other: "SiteConfig") -> bool:
        return self.occupied <= other.occupied

    @property
    def is_full(self) -> bool:
        return len(self.occupied) == self.n

    def vacant(self) -> list[int]:
        return [v for v in range(self.n) if v not in self.occupied]

    def to_hex(self) -> str:
        """``"<n>:<hex>"`` where bit v of the integer is vertex v."""
        bits = 0
        for v in self.occupied:
            bits |= 1 << v
        return f"{self.n}:{bits:x}"

    @classmethod
    def from_hex(cls, text: str) -> "SiteConfig":
        n_txt, hex_txt = text.split(":")
        n, bits = int(n_txt), int(hex_txt, 16)
        if bits >> n:
            raise PreconditionError("bit-set has bits beyond n")
        occ = []
        v = 0
        while bits:
            if bits & 1:
                occ.append(v)
            bits >>= 1
            v += 1
        return cls(n, frozenset(occ))


@dataclass(frozen=True)
class RunReport:
    final: SiteConfig
    rounds: int
    newly_occupied_per_round: tuple[int, ...]

    def to_record(self) -> dict:
        return {"rounds": self.rounds,
                "counts": list(self.newly_occupied_per_round),
                "occupied_count": len(self.final)}

    def to_json(self) -> str:
        return json.dumps(self.to_record())


class OriginNeverOccupied(BootpercError):
    """The origin of a spanned sequence stays vacant in the full run."""


def _check(g: Graph, c: SiteConfig, k: int) -> None:
    if k < 1:
        raise PreconditionError("k must be at least 1")
    if c.n != g.n:
        raise PreconditionError("configuration size differs from graph size")


def step(g: Graph, c: SiteConfig, k: int) -> SiteConfig:
    """One synchronous application of the k-rule."""
    _check(g, c, k)
    occ = c.occupied
    new = [v for v in range(g.n) if v not in occ
           and sum(1 for w in g.adjacency[v] if w in occ) >= k]
    return SiteConfig(g.n, occ.union(new))


def _run_flags(g: Graph, occ: list[bool], k: int) -> list[int]:
    """Run in place on a boolean list; returns per-round addition counts."""
    adj = g.adjacency
    count = [0] * g.n
    frontier = [v for v in range(g.n) if occ[v]]
    per_round = []
    while True:
        touched = []
        for v in frontier:
            for w in adj[v]:
                if not occ[w]:
                    count[w] += 1
                    if count[w] == k:
                        touched.append(w)
        for w in touched:
            occ[w] = True
        per_round.append(len(touched))
        if not touched:
            return per_round
        frontier = touched


def run(g: Graph, c0: SiteConfig, k: int) -> RunReport:
    """Iterate :func:`step` until nothing changes.

    The per-round list ends with the terminal zero-addition round, so a
    fully occupied start gives ``rounds == 1`` and counts ``(0,)``.
    """
    _check(g, c0, k)
    occ = [False] * g.n
    for v in c0.occupied:
        occ[v] = True
    per_round = _run_flags(g, occ, k)
    final = SiteConfig(g.n, frozenset(v for v in range(g.n) if occ[v]))
    return RunReport(final, len(per_round), tuple(per_round))


def final_occupied(g: Graph, occupied: Iterable[int], k: int) -> set[int]:
    """Final occupied set of a run, without building a report."""
    occ = [False] * g.n
    for v in occupied:
        occ[v] = True
    _run_flags(g, occ, k)
    return {v for v in range(g.n) if occ[v]}


def _restricted_final(g: Graph, s: set[int], occupied: frozenset[int], k: int) -> set[int]:
    """Final occupied set of the process restricted to ``s`` (outside held vacant)."""
    count: dict[int, int] = {}
    occ = {v for v in s if v in occupied}
    frontier = list(occ)
    while frontier:
        nxt = []
        for v in frontier:
            for w in g.adjacency[v]:
                if w in s and w not in occ:
                    count[w] = count.get(w, 0) + 1
                    if count[w] == k:
                        nxt.append(w)
        occ.update(nxt)
        frontier = nxt
    return occ


def internally_spanned(g: Graph, s: Iterable[int], c0: SiteConfig, k: int) -> bool:
    """True iff the dynamics restricted to ``s`` occupies all of ``s``."""
    _check(g, c0, k)
    s = set(s)
    if any(not 0 <= v < g.n for v in s):
        raise PreconditionError("set is not a subset of the vertices")
    return _restricted_final(g, s, c0.occupied, k) >= s


def _minimal_spanning(g: Graph, must: set[int], pool: set[int],
                      occupied: frozenset[int], k: int) -> set[int]:
    """Inclusion-minimal S with must <= S <= pool occupying all of ``must``.

    Occupation of ``must`` is monotone in S, so one greedy deletion pass
    already yields an inclusion-minimal set.  Far vertices are tried first.
    """
    s = set(pool)
    dist = _dist_to(g, must, pool)
    order = sorted(s - must, key=lambda v: (-dist.get(v, 0), v))
    for v in order:
        s.discard(v)
        if not must <= _restricted_final(g, s, occupied, k):
            s.add(v)
    return s


def _dist_to(g: Graph, src: set[int], within: set[int]) -> dict[int, int]:
    dist = {v: 0 for v in src}
    frontier = list(src)
    while frontier:
        nxt = []
        for v in frontier:
            for w in g.adjacency[v]:
                if w in within and w not in dist:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def spanned_sequence(g: Graph, o: int, c0: SiteConfig, k: int,
                     max_size: int) -> list[frozenset[int]]:
    """Strictly increasing connected internally spanned sets around ``o``.

    V_1 is a minimal set that occupies ``o`` on its own; V_{i+1} is a minimal
    set occupying V_i plus its smallest-id neighbour that ends up occupied.
    Stops before a set would exceed ``max_size`` or when no neighbour is left.
    """
    _check(g, c0, k)
    final = final_occupied(g, c0.occupied, k)
    if o not in final:
        raise OriginNeverOccupied(f"vertex {o} is never occupied")
    # only vertices in o's component of the final occupied set can matter
    pool = set(_dist_to(g, {o}, final))
    seq: list[frozenset[int]] = []
    current = _minimal_spanning(g, {o}, pool, c0.occupied, k)
    while len(current) <= max_size:
        seq.append(frozenset(current))
        nbrs = sorted({w for v in current for w in g.adjacency[v]
                       if w in pool and w not in current})
        if not nbrs:
            break
        target = current | {nbrs[0]}
        current = _minimal_spanning(g, target, pool, c0.occupied, k)
    return seq


def vacant_components(g: Graph, final: SiteConfig) -> list[list[int]]:
    """Connected components of the vacant set of a configuration."""
    return connected_components(g, final.vacant())


__all__ = ["SiteConfig", "RunReport", "OriginNeverOccupied", "step", "run",
           "final_occupied", "internally_spanned", "spanned_sequence",
           "vacant_components", "is_connected"]
