"""Compiled inner loops for the Monte Carlo layer."""
from __future__ import annotations

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _kth_two(vals, n, k, a):
    """(k-th, (k+1)-th) smallest of vals[:n], inf where missing; ``a`` is scratch."""
    for i in range(k + 1):
        a[i] = INF
    for j in range(n):
        x = vals[j]
        if x < a[k]:
            i = k
            while i > 0 and a[i - 1] > x:
                a[i] = a[i - 1]
                i -= 1
            a[i] = x
    return a[k - 1], a[k]


@njit(cache=True)
def tree_thresholds(parent, child_start, u, k, complete):
    """Per-trial occupation thresholds on a breadth-first tree.

    ``u[v]`` is the vertex's uniform (negative for pre-occupied sites).
    Returns (root threshold, complete-occupation threshold); vertex v is
    finally occupied at density p iff p exceeds its threshold.  The second
    value is nan unless ``complete``.
    """
    n = parent.size
    scratch = np.empty(k + 1)
    up = np.empty(n)
    for v in range(n - 1, -1, -1):
        lo, hi = child_start[v], child_start[v + 1]
        t = INF
        if hi - lo >= k:
            t = _kth_two(up[lo:hi], hi - lo, k, scratch)[0]
        up[v] = min(u[v], t)
    if not complete:
        return up[0], np.nan
    down = np.full(n, INF)  # message from the parent into v
    worst = -INF
    widest = 1
    for v in range(n):
        widest = max(widest, child_start[v + 1] - child_start[v] + 1)
    buf = np.empty(widest)
    for v in range(n):
        lo, hi = child_start[v], child_start[v + 1]
        nb = hi - lo
        for i in range(lo, hi):
            buf[i - lo] = up[i]
        if v > 0:
            buf[nb] = down[v]
            nb += 1
        kth, k1th = INF, INF
        if nb >= k:
            kth, k1th = _kth_two(buf, nb, k, scratch)
        final = min(u[v], kth)
        if final > worst:
            worst = final
        for c in range(lo, hi):
            # k-th smallest of the multiset with c's own message removed
            other = k1th if up[c] <= kth else kth
            down[c] = min(u[v], other)
    return up[0], worst


# functions taking a Generator are not cached: reloading them from disk
# crashes with recursion
@njit
def _good(rng, p, k, d, nkids, rem, leaf_good, draw_self):
    """Is the vertex occupied using only its own d-ary subtree?

    Children are explored lazily and evaluation stops as soon as the
    answer is decided.  ``leaf_good`` pre-occupies the horizon.
    """
    if draw_self and rng.random() < p:
        return True
    if rem == 0:
        return leaf_good and draw_self
    if nkids < k:
        return False
    g = 0
    b = 0
    for _ in range(nkids):
        if _good(rng, p, k, d, d, rem - 1, leaf_good, True):
            g += 1
            if g >= k:
                return True
        else:
            b += 1
            if b > nkids - k:
                return False
    return False


@njit
def count_good(rng, p, k, d, top_kids, depth, leaf_good, draw_self, trials):
    """Number of trials in which the top vertex is occupied from below."""
    hits = 0
    for _ in range(trials):
        if _good(rng, p, k, d, top_kids, depth, leaf_good, draw_self):
            hits += 1
    return hits


@njit(cache=True)
def graph_final_count(indptr, indices, occ, k):
    """Run the k-rule to its fixed point in place; return occupied count."""
    n = occ.size
    cnt = np.zeros(n, np.int64)
    frontier = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    nf = 0
    for v in range(n):
        if occ[v]:
            frontier[nf] = v
            nf += 1
    total = nf
    while nf > 0:
        nn = 0
        for i in range(nf):
            v = frontier[i]
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if not occ[w]:
                    cnt[w] += 1
                    if cnt[w] == k:
                        nxt[nn] = w
                        nn += 1
        for i in range(nn):
            occ[nxt[i]] = True
        total += nn
        frontier, nxt = nxt, frontier
        nf = nn
    return total
