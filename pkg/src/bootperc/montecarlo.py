"""Seeded Monte Carlo experiments on tree truncations and grids.

Every random draw comes from a PCG64 stream derived from the user seed and
an integer key, so results do not depend on evaluation order:

* sweeps use key (p_index, trial), independent across densities;
* coupled runs use key (trial,) and give each vertex one uniform U_v,
  occupied iff U_v < p, so outcomes are monotone in p trial by trial.

Two events are available on trees.  "root" asks whether the root ends up
occupied; "complete" asks whether every vertex does.  On a finite
truncation complete occupation is degenerate (certain with a pre-occupied
horizon, nearly impossible with a random one, since horizon leaves have a
single neighbour), so "root" is the default there.  Grids default to
"complete".
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .analytic import eval_B
from .errors import PreconditionError
from .graph_core import (Graph, OffspringDistribution, RootedTree, check_seed, gen_grid,
                         gen_gw_tree, gen_path_tree, gen_regular_tree, gen_subdivided_tree,
                         make_rng)

CSV_HEADER = ["p", "estimate", "std_err", "trials", "d", "k", "depth", "seed"]
KINDS = ("regular", "gw", "subdivided", "path", "grid")


@dataclass(frozen=True)
class GeneratorSpec:
    """Which family to sample from.

    ``regular``: T_d with ``rooted_arity`` ("d_plus_1_regular" or "d_ary");
    ``gw``: Galton-Watson tree with offspring law ``dist``;
    ``subdivided``, ``path``; ``grid``: n x n grid with n = depth.
    """

    kind: str
    d: int = 0
    rooted_arity: str = "d_plus_1_regular"
    dist: OffspringDistribution | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"unknown generator kind {self.kind!r}")
        if self.kind in ("regular", "subdivided") and self.d < 2:
            raise PreconditionError(f"{self.kind} trees need d >= 2")
        if self.kind == "gw" and self.dist is None:
            raise PreconditionError("gw generator needs an offspring distribution")
        if self.rooted_arity not in ("d_ary", "d_plus_1_regular"):
            raise PreconditionError("rooted_arity must be d_ary or d_plus_1_regular")

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """``regular:3``, ``regular:3:d_ary``, ``gw:2:0.5,4:0.5``,
        ``subdivided:3``, ``path`` or ``grid``."""
        kind, _, rest = text.partition(":")
        if kind == "regular":
            d, _, arity = rest.partition(":")
            return cls("regular", int(d), arity or "d_plus_1_regular")
        if kind == "gw":
            return cls("gw", dist=OffspringDistribution.parse(rest))
        if kind == "subdivided":
            return cls("subdivided", int(rest))
        if kind in ("path", "grid") and not rest:
            return cls(kind, 4 if kind == "grid" else 1)
        raise PreconditionError(f"cannot parse generator spec {text!r}")

    def label_d(self) -> int:
        if self.kind == "gw":
            return int(max(self.dist.values))
        return self.d

    def build(self, depth: int, rng=None) -> RootedTree | Graph:
        if self.kind == "regular":
            return gen_regular_tree(self.d, depth, self.rooted_arity)
        if self.kind == "gw":
            return gen_gw_tree(self.dist, depth, rng)
        if self.kind == "subdivided":
            return gen_subdivided_tree(self.d, depth)
        if self.kind == "path":
            return gen_path_tree(depth)
        return gen_grid(depth)


@dataclass(frozen=True)
class SweepRow:
    p: float
    estimate: float
    trials: int
    std_err: float
    params: dict = field(default_factory=dict)

    @classmethod
    def from_hits(cls, p: float, hits: int, trials: int, **params) -> "SweepRow":
        est = hits / trials
        return cls(float(p), est, trials, math.sqrt(est * (1 - est) / trials), params)

    def csv_fields(self) -> list[str]:
        g = lambda x: f"{x:.12g}"
        pr = self.params
        return [g(self.p), g(self.estimate), g(self.std_err), str(self.trials),
                str(pr.get("d", "")), str(pr.get("k", "")), str(pr.get("depth", "")),
                str(pr.get("seed", ""))]


def rows_to_csv(rows: Sequence[SweepRow], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")


# ---------------------------------------------------------------- extinction


def exact_extinction_y(d: int, k: int, p: float, n: int) -> float:
    """y_n: n applications of B starting from 0."""
    y = 0.0
    for _ in range(n):
        y = eval_B(d, k, p, y)
    return y


def mc_extinction_depth_n(d: int, k: int, p: float, n: int, trials: int,
                          seed: int) -> SweepRow:
    """Estimate y_n by sampling the d-ary tree below a vacant vertex.

    A trial succeeds when at least k of the d children get occupied within
    n levels, i.e. when no vacant (d+1-k)-ary subtree reaches depth n.
    Children are explored lazily, so only the vacant cluster is sampled.
    """
    if not 2 <= k <= d:
        raise PreconditionError("need 2 <= k <= d")
    _check_p(p)
    if trials < 1 or n < 0:
        raise PreconditionError("need trials >= 1 and n >= 0")
    check_seed(seed)
    rng = make_rng(seed)
    hits = _kernels.count_good(rng, float(p), k, d, d, n, False, False, trials)
    return SweepRow.from_hits(p, int(hits), trials, d=d, k=k, depth=n, seed=seed)


# ---------------------------------------------------------------- occupation sweeps


def exact_root_occupation(d: int, k: int, p: float, depth: int, root_children: int,
                          boundary: str = "vacant") -> float:
    """Probability that the root of a regular truncation ends up occupied."""
    x = 1.0 if boundary == "occupied" else p
    for _ in range(depth - 1):
        x = p + (1 - p) * (1 - _binom_cdf(d, k - 1, x))
    if depth == 0:
        return x
    return p + (1 - p) * (1 - _binom_cdf(root_children, k - 1, x))


def _binom_cdf(n: int, j: int, q: float) -> float:
    return math.fsum(math.comb(n, i) * q**i * (1 - q) ** (n - i) for i in range(min(j, n) + 1))


def _graph_csr(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    deg = np.array([len(a) for a in g.adjacency], dtype=np.int64)
    indptr = np.concatenate(([0], np.cumsum(deg)))
    indices = np.fromiter((w for a in g.adjacency for w in a), dtype=np.int64,
                          count=int(indptr[-1]))
    return indptr, indices


def _uniforms(tree: RootedTree, rng, boundary: str) -> np.ndarray:
    u = rng.random(tree.n)
    if boundary == "occupied":
        u[tree.boundary] = -1.0
    return u


def _check_sweep(spec: GeneratorSpec, k: int, depth: int, trials: int, boundary: str,
                 event: str | None, seed: int) -> str:
    if k < 1:
        raise PreconditionError("k must be at least 1")
    if depth < 0 or trials < 1:
        raise PreconditionError("need depth >= 0 and trials >= 1")
    if boundary not in ("vacant", "occupied"):
        raise PreconditionError("boundary must be 'vacant' or 'occupied'")
    check_seed(seed)
    if event is None:
        event = "complete" if spec.kind == "grid" else "root"
    if event not in ("root", "complete"):
        raise PreconditionError("event must be 'root' or 'complete'")
    return event


def mc_occupation_sweep(spec: GeneratorSpec, k: int, p_grid: Sequence[float], trials: int,
                        depth: int, boundary: str = "vacant", seed: int = 0,
                        event: str | None = None) -> list[SweepRow]:
    """Fraction of trials in which ``event`` happens, for each p.

    ``boundary="occupied"`` pre-occupies the horizon (the rim for grids);
    "vacant" samples it like every other site.
    """
    event = _check_sweep(spec, k, depth, trials, boundary, event, seed)
    for p in p_grid:
        _check_p(p)
    params = dict(d=spec.label_d(), k=k, depth=depth, seed=seed)
    rows = []
    fixed = None
    if spec.kind != "gw":
        fixed = spec.build(depth)
    lazy = spec.kind == "regular" and event == "root"
    top = spec.d + 1 if spec.rooted_arity == "d_plus_1_regular" else spec.d
    if spec.kind == "grid":
        indptr, indices = _graph_csr(fixed)
        rim = np.zeros(fixed.n, dtype=bool)
        rim[list(gen_grid(depth, filled_boundary=True).boundary)] = True
        centre = (depth // 2) * depth + depth // 2
    for pi, p in enumerate(p_grid):
        hits = 0
        for t in range(trials):
            rng = make_rng(seed, pi, t)
            if lazy:
                hits += _kernels.count_good(rng, float(p), k, spec.d, top, depth,
                                            boundary == "occupied", True, 1)
            elif spec.kind == "grid":
                occ = rng.random(fixed.n) < p
                if boundary == "occupied":
                    occ |= rim
                total = _kernels.graph_final_count(indptr, indices, occ, k)
                hits += (total == fixed.n) if event == "complete" else bool(occ[centre])
            else:
                tree = fixed if fixed is not None else spec.build(depth, rng)
                u = _uniforms(tree, rng, boundary)
                t_root, t_all = _kernels.tree_thresholds(
                    tree.parent, tree.child_start, u, k, event == "complete")
                hits += p > (t_root if event == "root" else t_all)
        rows.append(SweepRow.from_hits(p, int(hits), trials, **params))
    return rows


def mc_thresholds(spec: GeneratorSpec, k: int, depth: int, trials: int, seed: int,
                  boundary: str = "vacant", event: str = "root") -> np.ndarray:
    """Coupled per-trial thresholds: the event holds at p iff p > threshold."""
    event = _check_sweep(spec, k, depth, trials, boundary, event, seed)
    if spec.kind == "grid":
        raise PreconditionError("coupled thresholds are implemented for trees only")
    fixed = None if spec.kind == "gw" else spec.build(depth)
    out = np.empty(trials)
    for t in range(trials):
        rng = make_rng(seed, t)
        tree = fixed if fixed is not None else spec.build(depth, rng)
        u = _uniforms(tree, rng, boundary)
        t_root, t_all = _kernels.tree_thresholds(tree.parent, tree.child_start, u, k,
                                                 event == "complete")
        out[t] = t_root if event == "root" else t_all
    return out


def mc_empirical_pc(spec: GeneratorSpec, k: int, depth: int, trials: int, tol: float,
                    seed: int, boundary: str = "vacant", event: str = "root") -> float:
    """Density at which the coupled empirical event probability crosses 1/2.

    Bisection on p; the empirical curve is monotone because every trial
    reuses its uniforms at all densities.
    """
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    th = mc_thresholds(spec, k, depth, trials, seed, boundary, event)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.mean(mid > th) >= 0.5:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
