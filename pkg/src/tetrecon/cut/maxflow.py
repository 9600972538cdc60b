"""Dinic max-flow on a CSR residual graph, and the binary Potts s-t construction."""

import numpy as np
from numba import njit


class NonSubmodular(ValueError):
    """A pairwise weight is negative, so the energy is not representable as a cut."""


@njit(cache=True)
def _bfs_levels(start, to, cap, s, t, level, queue):
    level[:] = -1
    level[s] = 0
    queue[0] = s
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for a in range(start[u], start[u + 1]):
            v = to[a]
            if cap[a] > 0.0 and level[v] < 0:
                level[v] = level[u] + 1
                queue[tail] = v
                tail += 1
    return level[t] >= 0


@njit(cache=True)
def _dinic(start, to, cap, rev, s, t):
    """Max-flow value; ``cap`` is turned into residual capacities in place."""
    n = start.shape[0] - 1
    level = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    it = np.empty(n, dtype=np.int64)
    path = np.empty(n, dtype=np.int64)     # arcs of the current path
    nodes = np.empty(n + 1, dtype=np.int64)
    flow = 0.0
    while _bfs_levels(start, to, cap, s, t, level, queue):
        it[:] = start[:-1]
        depth = 0
        u = s
        nodes[0] = s
        while True:
            if u == t:
                f = np.inf
                for i in range(depth):
                    f = min(f, cap[path[i]])
                for i in range(depth):
                    a = path[i]
                    cap[a] -= f
                    cap[rev[a]] += f
                flow += f
                depth = 0
                u = s
                continue
            advanced = False
            while it[u] < start[u + 1]:
                a = it[u]
                v = to[a]
                if cap[a] > 0.0 and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    nodes[depth] = v
                    u = v
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                if u == s:
                    break
                level[u] = -1      # dead end for this phase
                depth -= 1
                u = nodes[depth]
                it[u] += 1
    return flow


@njit(cache=True)
def _reaches_sink(start, to, cap, rev, t):
    """Nodes with a residual path to ``t``."""
    n = start.shape[0] - 1
    mark = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    mark[t] = True
    queue[0] = t
    head, tail = 0, 1
    while head < tail:
        w = queue[head]
        head += 1
        for a in range(start[w], start[w + 1]):
            v = to[a]
            if not mark[v] and cap[rev[a]] > 0.0:
                mark[v] = True
                queue[tail] = v
                tail += 1
    return mark


def residual_graph(n, tails, heads, caps, rev_caps):
    """CSR arrays for arcs tails->heads (capacity caps) each paired with a reverse arc."""
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    m = len(tails)
    tail = np.concatenate([tails, heads])
    to = np.concatenate([heads, tails])
    cap = np.concatenate([np.asarray(caps, dtype=np.float64),
                          np.asarray(rev_caps, dtype=np.float64)])
    rev = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
    order = np.argsort(tail, kind="stable")
    pos = np.empty_like(order)
    pos[order] = np.arange(2 * m)
    start = np.zeros(n + 1, dtype=np.int64)
    np.add.at(start, tail + 1, 1)
    np.cumsum(start, out=start)
    return start, to[order], cap[order], pos[rev[order]]


def potts_cut(unary, edges, weights, pinned_outside=None):
    """Minimize sum_t unary[t, l_t] + sum_e w_e [l_u != l_v] over l in {0, 1}^n.

    Label 0 sits on the source side.  Each node's unaries are shifted by
    their minimum so terminal capacities are non-negative.  Among minimal cuts
    the one with the largest source side is returned, so ties go to label 0.
    Nodes in ``pinned_outside`` are tied to the source with infinite capacity.

    Returns (labels, flow) where flow is the cut value of the shifted energy.
    """
    unary = np.asarray(unary, dtype=np.float64)
    n = len(unary)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if len(weights) != len(edges):
        raise ValueError("edges and weights differ in length")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise NonSubmodular("pairwise weights must be finite and non-negative")
    shift = unary.min(axis=1)
    to_sink = unary[:, 0] - shift        # paid when the node stays on the source side
    from_src = unary[:, 1] - shift       # paid when the node goes to the sink side
    if pinned_outside is not None:
        from_src = np.where(pinned_outside, np.inf, from_src)
    s, t = n, n + 1
    ids = np.arange(n)
    a = from_src > 0
    b = to_sink > 0
    keep = weights > 0
    tails = np.concatenate([np.full(a.sum(), s), ids[b], edges[keep, 0]])
    heads = np.concatenate([ids[a], np.full(b.sum(), t), edges[keep, 1]])
    caps = np.concatenate([from_src[a], to_sink[b], weights[keep]])
    rcaps = np.concatenate([np.zeros(a.sum() + b.sum()), weights[keep]])
    start, to, cap, rev = residual_graph(n + 2, tails, heads, caps, rcaps)
    flow = _dinic(start, to, cap, rev, s, t)
    inside = _reaches_sink(start, to, cap, rev, t)[:n]
    return inside.astype(np.int8), flow
