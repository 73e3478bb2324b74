"""Cutset contents, branching numbers and pruning of rooted trees.

Edge depths follow the lower endpoint: the edge (parent, v) sits at depth
``depth(v)``.  The λ-content of a cutset is the sum of λ^(-|e|) over its
edges.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import Inconclusive, PreconditionError
from .forts import FortCertificate
from .graph_core import RootedTree


@dataclass(frozen=True)
class CutSet:
    edges: tuple[tuple[int, int], ...]
    host: RootedTree = field(repr=False, compare=False)

    def validate(self) -> None:
        """Antichain, and every root-to-boundary path crosses an edge."""
        t = self.host
        cut = {c for _, c in self.edges}
        for p, c in self.edges:
            if int(t.parent[c]) != p:
                raise PreconditionError(f"({p}, {c}) is not a tree edge")
            if any(a in cut for a in t.ancestors(c)):
                raise PreconditionError("cutset is not an antichain")
        for leaf in np.flatnonzero(t.boundary):
            leaf = int(leaf)
            if leaf not in cut and not any(a in cut for a in t.ancestors(leaf)):
                raise PreconditionError(f"boundary leaf {leaf} is not separated")

    def to_record(self) -> list[list[int]]:
        return [list(e) for e in self.edges]


@dataclass(frozen=True)
class ContentReport:
    lam: float
    value: float
    edge_depths: tuple[int, ...]


def content(t: RootedTree, cut: CutSet | Sequence[tuple[int, int]], lam: float) -> ContentReport:
    if lam <= 0:
        raise PreconditionError("lambda must be positive")
    edges = cut.edges if isinstance(cut, CutSet) else tuple(cut)
    depths = tuple(int(t.depth[c]) for _, c in edges)
    value = math.fsum(lam ** (-d) for d in depths)
    return ContentReport(float(lam), value, depths)


def _subtree_min(t: RootedTree, lam: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-vertex (cut-above value, children total, best value) of the min-content recursion.

    Leaves on the truncation boundary must be cut; leaves above it are dead
    ends of a finite branch and cost nothing.
    """
    n = t.n
    depth = t.depth
    above = np.power(float(lam), -depth.astype(float))
    below = np.zeros(n)  # sum over children of their best values
    best = np.where(t.boundary, above, 0.0)
    for r in range(t.max_depth - 1, -1, -1):
        lo, hi = t.level_start[r], t.level_start[r + 1]
        clo, chi = t.level_start[r + 1], t.level_start[r + 2]
        if chi > clo:
            below[lo:hi] = np.bincount(t.parent[clo:chi] - lo, weights=best[clo:chi],
                                       minlength=hi - lo)
        has_kids = t.num_children[lo:hi] > 0
        best[lo:hi] = np.where(has_kids, np.minimum(above[lo:hi], below[lo:hi]), best[lo:hi])
    return above, below, best


def min_cut_content(t: RootedTree, lam: float) -> tuple[float, CutSet]:
    """Smallest λ-content over cutsets separating the root from the boundary."""
    if lam <= 0:
        raise PreconditionError("lambda must be positive")
    if t.n < 2:
        raise PreconditionError("tree needs at least one edge")
    above, below, best = _subtree_min(t, lam)
    edges = []
    stack = list(reversed(t.children(0)))
    while stack:
        v = stack.pop()
        if best[v] == 0.0:
            continue
        if t.num_children[v] == 0 or above[v] <= below[v]:
            edges.append((int(t.parent[v]), v))
        else:
            stack.extend(reversed(t.children(v)))
    return float(below[0]), CutSet(tuple(edges), t)


@dataclass(frozen=True)
class BranchingEstimate:
    lower: float
    upper: float
    depth_used: int


NONVANISHING, DECAYING = 0.9, 0.5


def estimate_branching(family: Callable[[int], RootedTree], lambda_lo: float,
                       lambda_hi: float, depths: Sequence[int],
                       tol: float = 1e-4) -> BranchingEstimate:
    """Heuristic bracket for the branching number of a tree family.

    For each λ the ratio of minimal contents at depths 2D and D is compared
    with 0.9 (content persists) and 0.5 (content decays), D the largest
    usable depth.  Bisection locates both thresholds.  If the content
    behaves like (b/λ)^n the ratio is (b/λ)^D, so each threshold λ is
    mapped back to b = λ·ratio^(1/D); the bracket is the envelope of the
    two mapped values, each taken on its classified side.
    Not a certified bound.
    """
    if not 0 < lambda_lo < lambda_hi:
        raise PreconditionError("need 0 < lambda_lo < lambda_hi")
    if not depths:
        raise PreconditionError("need at least one depth")
    cache: dict[int, RootedTree] = {}

    def tree(D):
        if D not in cache:
            cache[D] = family(D)
        return cache[D]

    D = max(depths)

    def ratio(lam: float) -> float:
        a = min_cut_content(tree(D), lam)[0]
        b = min_cut_content(tree(2 * D), lam)[0]
        if a <= 0:
            raise Inconclusive("tree family has no boundary at this depth")
        return b / a

    def edge(threshold: float) -> tuple[float, float]:
        lo, hi = lambda_lo, lambda_hi
        if ratio(lo) <= threshold or ratio(hi) >= threshold:
            raise Inconclusive(f"ratio does not cross {threshold} in "
                               f"[{lambda_lo}, {lambda_hi}] at depth {D}")
        while hi - lo > tol * max(1.0, lo):
            mid = 0.5 * (lo + hi)
            if ratio(mid) > threshold:
                lo = mid
            else:
                hi = mid
        return lo, hi

    # keep the side of each bracket that was actually classified
    a = edge(NONVANISHING)[0] * NONVANISHING ** (1 / D)
    b = edge(DECAYING)[1] * DECAYING ** (1 / D)
    return BranchingEstimate(min(a, b), max(a, b), 2 * D)


# ---------------------------------------------------------------- pruning


@dataclass(frozen=True)
class PruneReport:
    fort: FortCertificate
    beta: float
    alpha: float
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-9

    def to_record(self) -> dict:
        return {"beta": self.beta, "alpha": self.alpha, "lhs": self.lhs,
                "rhs": self.rhs, "holds": self.holds, "fort": self.fort.to_record()}

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def _prune_once(t: RootedTree, beta: float) -> tuple[list[int], float, float]:
    """Kept vertex ids, content of the kept leaves at beta-1, content at beta."""
    n = t.n
    M = np.ones(n)
    for v in range(n - 1, -1, -1):
        kids = t.children(v)
        if len(kids):
            M[v] = M[kids.start:kids.stop].sum() / beta
    drop = np.zeros(n, dtype=bool)
    for v in range(n):
        kids = t.children(v)
        if len(kids):
            # argmax returns the first maximum, i.e. the smallest id
            drop[kids.start + int(np.argmax(M[kids.start:kids.stop]))] = True
    keep = np.ones(n, dtype=bool)
    for v in range(1, n):
        keep[v] = keep[t.parent[v]] and not drop[v]
    L = np.zeros(n)
    for v in range(n - 1, -1, -1):
        if not keep[v]:
            continue
        kids = t.children(v)
        if not len(kids):
            L[v] = 1.0
        else:
            s = sum(L[c] for c in kids if keep[c])
            L[v] = s / (beta - 1)
    return [int(v) for v in np.flatnonzero(keep)], float(L[0]), float(M[0])


def prune_beta(t: RootedTree, beta: float) -> PruneReport:
    """Drop the largest-content child subtree everywhere; keep a 1-fort.

    The report checks  μ_{β-1}(kept leaves of t) <= μ_β(leaves of t)^α,
    α = β/(β-1).
    """
    if not beta > 1:
        raise PreconditionError("beta must exceed 1")
    keep, lhs, m = _prune_once(t, beta)
    alpha = beta / (beta - 1)
    return PruneReport(FortCertificate(frozenset(keep), 1, t.graph), float(beta),
                       alpha, lhs, m**alpha)


class TrivialFortWarning(UserWarning):
    """Pruning reached a single vertex before the last round."""


def prune_k(t: RootedTree, k: int, betas: Sequence[float]) -> list[PruneReport]:
    """Prune ``k`` times; round i leaves an i-fort of ``t``.

    Each report's fort is expressed in ``t``'s vertex ids with parameter i;
    its inequality refers to the tree it was pruned from.
    """
    if k < 1:
        raise PreconditionError("k must be at least 1")
    if len(betas) < k:
        raise PreconditionError("need one beta per pruning round")
    reports = []
    current, ids = t, np.arange(t.n)
    for i in range(k):
        rep = prune_beta(current, betas[i])
        keep = sorted(rep.fort.vertices)
        current, sub = current.restrict(keep)
        ids = ids[sub]
        fort = FortCertificate(frozenset(int(v) for v in ids), i + 1, t.graph)
        reports.append(PruneReport(fort, rep.beta, rep.alpha, rep.lhs, rep.rhs))
        if current.n == 1 and i < k - 1:
            warnings.warn(f"fort is a single vertex after {i + 1} rounds", TrivialFortWarning)
    return reports


def fortfree_br_bound(k: int, N: int) -> float:
    """k - 2k ln k / ln N."""
    if k < 2 or N < 2:
        raise PreconditionError("need k >= 2 and N >= 2")
    return k - 2 * k * math.log(k) / math.log(N)
