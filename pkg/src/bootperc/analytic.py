"""Numeric critical probabilities for bootstrap percolation on trees.

Notation.  On the d-ary tree let x be the probability that a vertex is
eventually occupied using only its subtree.  Then x = B(x) with

    B(x) = P(Binom(d, (1-x)(1-p)) <= d-k).

It is often easier to track a survival variable u (a vertex is vacant and
has at least m = d+1-k children of the same kind):

    u = phi(u) = (1-p) P(Binom(d, u) >= m).

A positive solution of the second equation exists exactly when the least
solution of the first is below 1.  Since phi(u)/u = (1-p) g(u) with g free
of p, the existence test reduces to a one-dimensional maximisation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammaln, logsumexp

from .errors import BudgetExceeded, DegenerateDistribution, NonConvergence, PreconditionError
from .graph_core import Graph, OffspringDistribution

FP_TOL = 1e-12
FP_CAP = 10**6
P_TOL = 1e-10


@dataclass(frozen=True)
class FixedPointResult:
    value: float
    iterations: int
    residual: float
    converged: bool = True


@dataclass(frozen=True)
class CriticalResult:
    p_crit: float
    bracket_width: float
    method: str
    bracket: tuple[float, float] = (math.nan, math.nan)

    def to_record(self) -> dict:
        return {"p_crit": self.p_crit, "bracket_lo": self.bracket[0],
                "bracket_hi": self.bracket[1], "bracket_width": self.bracket_width,
                "method": self.method}


# ---------------------------------------------------------------- binomial sums


@lru_cache(maxsize=None)
def _log_binom_coeffs(d: int) -> np.ndarray:
    j = np.arange(d + 1)
    return gammaln(d + 1) - gammaln(j + 1) - gammaln(d - j + 1)


def _binom_sum(d: int, lo: int, hi: int, s: float, shift: int = 0) -> float:
    """sum_{j=lo}^{hi} C(d,j) s^(j-shift) (1-s)^(d-j), explicit and stable."""
    lo, hi = max(lo, 0), min(hi, d)
    if lo > hi:
        return 0.0
    j = np.arange(lo, hi + 1)
    if s <= 0.0 or s >= 1.0:
        # only the j with zero exponent survive
        target = shift if s <= 0.0 else d
        if s <= 0.0:
            return float(math.comb(d, target)) if lo <= target <= hi else 0.0
        return 1.0 if lo <= d <= hi else 0.0
    if d <= 60:
        t = np.array([math.comb(d, int(i)) for i in j], dtype=float)
        return float(np.sum(t * s ** (j - shift).astype(float) * (1 - s) ** (d - j).astype(float)))
    logs = _log_binom_coeffs(d)[lo:hi + 1] + (j - shift) * math.log(s) + (d - j) * math.log1p(-s)
    return float(np.exp(logsumexp(logs)))


def _check_dkp(d: int, k: int, p: float) -> None:
    if not 2 <= k <= d:
        raise PreconditionError(f"need 2 <= k <= d, got d={d}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")


def eval_B(d: int, k: int, p: float, x: float) -> float:
    """P(Binom(d, (1-x)(1-p)) <= d-k)."""
    _check_dkp(d, k, p)
    if not 0.0 <= x <= 1.0:
        raise PreconditionError("x must lie in [0, 1]")
    s = (1 - x) * (1 - p)
    return min(1.0, _binom_sum(d, 0, d - k, s))


def _ratio(d: int, m: int, u: float) -> float:
    """g(u) = P(Binom(d, u) >= m) / u, continuous at u = 0."""
    if u <= 0.0:
        return float(d) if m == 1 else 0.0
    return _binom_sum(d, m, d, u, shift=1)


def _max_ratio(g: Callable[[float], float], grid: int = 801) -> tuple[float, float]:
    """(argmax, max) of a smooth function on [0, 1] by grid then Brent."""
    us = np.linspace(0.0, 1.0, grid)
    vals = np.array([g(u) for u in us])
    i = int(np.argmax(vals))
    best_u, best = float(us[i]), float(vals[i])
    a, b = us[max(i - 1, 0)], us[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda u: -g(u), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-13})
    if res.success and -res.fun > best:
        best_u, best = float(res.x), float(-res.fun)
    return best_u, best


@lru_cache(maxsize=None)
def _regular_peak(d: int, k: int) -> tuple[float, float]:
    return _max_ratio(lambda u: _ratio(d, d + 1 - k, u))


def _has_survival(d: int, k: int, p: float) -> bool:
    return (1 - p) * _regular_peak(d, k)[1] >= 1.0


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink [lo, hi] with pred(lo) true and pred(hi) false."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


# ---------------------------------------------------------------- regular trees


def smallest_fixed_point(d: int, k: int, p: float, tol: float = FP_TOL,
                         cap: int = FP_CAP, strict: bool = False) -> FixedPointResult:
    """Least fixed point of B in [0, 1] by monotone iteration from 0.

    Hitting ``cap`` returns ``converged=False`` (or raises with ``strict``).
    """
    _check_dkp(d, k, p)
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    y = 0.0
    for it in range(1, cap + 1):
        nxt = eval_B(d, k, p, y)
        res = abs(nxt - y)
        y = max(y, nxt)  # guards against rounding; the exact sequence increases
        if res <= tol:
            return FixedPointResult(y, it, abs(eval_B(d, k, p, y) - y))
    if strict:
        raise NonConvergence(f"no convergence in {cap} iterations")
    return FixedPointResult(y, cap, abs(eval_B(d, k, p, y) - y), converged=False)


def survival_fixed_point(d: int, k: int, p: float) -> float:
    """Largest solution u of u = (1-p) P(Binom(d, u) >= d+1-k); 0 if none."""
    _check_dkp(d, k, p)
    m = d + 1 - k
    if p == 0.0:
        return 1.0
    if not _has_survival(d, k, p):
        return 0.0
    u0 = _regular_peak(d, k)[0]
    f = lambda u: (1 - p) * _ratio(d, m, u) - 1.0
    if f(u0) <= 0:
        return u0
    return brentq(f, u0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def critical_p_regular(d: int, k: int, tol: float = P_TOL) -> CriticalResult:
    """Critical probability for the k-rule on the d-ary tree, by bisection.

    The predicate is "a positive survival solution exists", i.e. the least
    fixed point of B is below 1.
    """
    _check_dkp(d, k, 0.0)
    lo, hi = _bisect(lambda p: _has_survival(d, k, p), 0.0, 1.0, tol)
    return CriticalResult(0.5 * (lo + hi), hi - lo, "bisection", (lo, hi))


def closed_form_kd(d: int) -> float:
    if d < 2:
        raise PreconditionError("need d >= 2")
    return 1.0 - 1.0 / d


def closed_form_k2(d: int) -> float:
    if d < 3:
        raise PreconditionError("need d >= 3")
    log_q = (2 * d - 3) * math.log(d - 1) - (d - 1) * math.log(d) - (d - 2) * math.log(d - 2)
    return -math.expm1(log_q)


@dataclass(frozen=True)
class GammaRow:
    d: int
    k: int
    p_crit: float
    upper: float  # (k-1)/d

    @property
    def below_upper(self) -> bool:
        return self.p_crit <= self.upper + 1e-9


def asymptotic_gamma_check(gamma: float, d_list: Sequence[int],
                           tol: float = P_TOL) -> list[GammaRow]:
    """p(T_d, ceil(gamma d)) for each d, with the (k-1)/d comparison."""
    if not 0.0 <= gamma <= 1.0:
        raise PreconditionError("gamma must lie in [0, 1]")
    rows = []
    for d in d_list:
        k = math.ceil(gamma * d - 1e-12)
        if k < 2:
            raise PreconditionError(f"gamma*d too small at d={d}")
        rows.append(GammaRow(d, k, critical_p_regular(d, k, tol).p_crit, (k - 1) / d))
    return rows


# ---------------------------------------------------------------- Galton-Watson trees


def _gw_check(dist: OffspringDistribution, k: int, p: float) -> None:
    if k < 2:
        raise PreconditionError("need k >= 2")
    if not 0.0 <= p <= 1.0:
        raise PreconditionError("p must lie in [0, 1]")
    if dist.prob_below(k) > 0:
        raise DegenerateDistribution(
            "offspring law puts mass below k; finite forts of bounded size "
            "appear infinitely often, so the critical probability is 1")


def gw_update(dist: OffspringDistribution, k: int, p: float, q: float) -> float:
    """q -> sum_j P(xi=j) (1-p) P(Binom(j, q) >= j-k+1)."""
    total = 0.0
    for j, w in dist.atoms:
        total += w * _binom_sum(j, j - k + 1, j, q)
    return (1 - p) * total


def _gw_ratio(dist: OffspringDistribution, k: int, q: float) -> float:
    if q <= 0.0:
        return sum(w * j for j, w in dist.atoms if j - k + 1 == 1)
    return sum(w * _binom_sum(j, j - k + 1, j, q, shift=1) for j, w in dist.atoms)


def gw_fort_fixed_point(dist: OffspringDistribution, k: int, p: float,
                        tol: float = FP_TOL, cap: int = FP_CAP,
                        strict: bool = False) -> FixedPointResult:
    """Largest fixed point of :func:`gw_update`, iterating down from 1.

    q is the probability that a vertex whose parent is already inside lies
    in an infinite vacant (k-1)-fort.
    """
    _gw_check(dist, k, p)
    q = 1.0
    for it in range(1, cap + 1):
        nxt = gw_update(dist, k, p, q)
        res = abs(nxt - q)
        q = min(q, nxt)
        if res <= tol:
            return FixedPointResult(q, it, abs(gw_update(dist, k, p, q) - q))
    if strict:
        raise NonConvergence(f"no convergence in {cap} iterations")
    return FixedPointResult(q, cap, abs(gw_update(dist, k, p, q) - q), converged=False)


def gw_critical(dist: OffspringDistribution, k: int, tol: float = P_TOL) -> CriticalResult:
    """Supremum of p at which the fort recursion keeps a positive solution."""
    _gw_check(dist, k, 0.0)
    peak = _max_ratio(lambda q: _gw_ratio(dist, k, q))[1]
    lo, hi = _bisect(lambda p: (1 - p) * peak >= 1.0, 0.0, 1.0, tol)
    return CriticalResult(0.5 * (lo + hi), hi - lo, "bisection", (lo, hi))


# ---------------------------------------------------------------- path bound


def z_fixed_point(d: int, k: int, p: float) -> float:
    """(1-p) P(Binom(d-1, u) >= d+1-k) at the largest survival solution u.

    Returns 0 when no positive survival solution exists.
    """
    u = survival_fixed_point(d, k, p)
    if u == 0.0:
        return 0.0
    return (1 - p) * _binom_sum(d - 1, d + 1 - k, d - 1, u)


def q_lower_bound(d: int, k: int, tol: float = P_TOL) -> float:
    """Largest p (to ``tol``) with sqrt(1 - z(p)^2) < 1/d."""
    _check_dkp(d, k, 0.0)
    need = math.sqrt(1 - 1 / d**2)
    hi = critical_p_regular(d, k).bracket[1]
    lo, _ = _bisect(lambda p: z_fixed_point(d, k, p) > need, 0.0, hi, tol)
    return lo


# ---------------------------------------------------------------- expansion bound


@dataclass(frozen=True)
class AnchoredBoundReport:
    d: int
    k: int
    h: float
    c: float
    K: float
    p_bound: float
    p_sharp: float
    target: float = field(repr=False)

    def rate(self, p: float) -> float:
        return rate_function(self.c, p)

    def to_record(self) -> dict:
        return {"d": self.d, "k": self.k, "h": self.h, "c": self.c, "K": self.K,
                "p_bound": self.p_bound, "p_sharp": self.p_sharp,
                "rate_at_bound": self.rate(self.p_bound), "target": self.target}


def rate_function(c: float, p: float) -> float:
    """I_p(c) = c log(c/p) + (1-c) log((1-c)/(1-p))."""
    if not 0 < p < 1:
        raise PreconditionError("p must lie in (0, 1)")
    out = c * math.log(c / p)
    if c < 1:
        out += (1 - c) * math.log((1 - c) / (1 - p))
    return out


def anchored_bound(d: int, k: int, h: float) -> AnchoredBoundReport:
    """Positive lower bound on the critical probability of a d-regular graph.

    ``h`` is the anchored expansion constant.  A vacant connected set of
    size m around the origin needs a fraction c = (h-d+2k)/(2k) of vacant
    sites; comparing a large-deviation rate with the ((d-1)e)^m count of
    such sets gives the bound.
    """
    if h + 2 * k - d <= 0:
        raise PreconditionError("theorem inapplicable: need h + 2k > d")
    if h > d:
        raise PreconditionError("expansion constant cannot exceed the degree")
    c = (h - d + 2 * k) / (2 * k)
    K = c * (1 - c) ** ((1 - c) / c) if c < 1 else 1.0
    target = math.log(d - 1) + 1
    p_bound = K / ((d - 1) * math.e) ** (1 / c)
    f = lambda p: rate_function(c, p) - target
    p_sharp = brentq(f, 1e-300, c * (1 - 1e-15), xtol=1e-300, rtol=1e-14)
    return AnchoredBoundReport(d, k, float(h), c, K, p_bound, p_sharp, target)


@dataclass(frozen=True)
class AnimalRow:
    m: int
    count: int
    bound: float

    @property
    def ok(self) -> bool:
        return self.count <= self.bound


def count_connected_sets(g: Graph, o: int, m_max: int, budget: int = 10**7) -> list[int]:
    """counts[m] = number of connected vertex sets of size m containing ``o``.

    Each set is produced once: a candidate is either added now or forbidden
    for the rest of the branch.
    """
    counts = [0] * (m_max + 1)
    adj = g.adjacency
    seen = 0

    def grow(size: int, members: set[int], frontier: list[int], banned: set[int]):
        nonlocal seen
        seen += 1
        if seen > budget:
            raise BudgetExceeded(f"more than {budget} connected sets")
        counts[size] += 1
        if size == m_max:
            return
        banned = set(banned)
        for i, w in enumerate(frontier):
            new_front = frontier[i + 1:] + [u for u in adj[w] if u not in members
                                             and u not in banned and u not in frontier]
            members.add(w)
            grow(size + 1, members, new_front, banned)
            members.discard(w)
            banned.add(w)

    grow(1, {o}, list(adj[o]), {o})
    return counts


def animal_bound_check(d: int, m_max: int, g: Graph, o: int,
                       budget: int = 10**7) -> list[AnimalRow]:
    """Exact counts of connected sets through ``o`` against ((d-1)e)^m."""
    if m_max < 1 or m_max > 10:
        raise PreconditionError("m_max must lie in 1..10")
    counts = count_connected_sets(g, o, m_max, budget)
    return [AnimalRow(m, counts[m], ((d - 1) * math.e) ** m) for m in range(1, m_max + 1)]
