"""Cell adjacency graphs, K-hop neighborhoods, and layered evaluation plans.

A plan lists, for an L-layer network, nested node sets S_0 ⊇ S_1 ⊇ ... ⊇ S_L
where layer k reads features on S_k and writes outputs on S_{k+1}.  Every
node of S_{k+1} has all of its graph neighbors in S_k, so the neighbor mean is
exact no matter which nodes the plan keeps.  The same machinery evaluates the
whole graph, one cell's receptive field, a chunk of cells, or a training batch
of (possibly overlapping) subgraphs placed side by side.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit


@dataclass
class Graph:
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n_nodes(self):
        return len(self.indptr) - 1

    def degree(self):
        return np.diff(self.indptr)

    def neighbors(self, u):
        return self.indices[self.indptr[u]:self.indptr[u + 1]]


def graph_from_tri(tri):
    """Facet adjacency of all cells (infinite cells included)."""
    m = tri.n_cells
    return Graph(np.arange(0, 4 * m + 1, 4, dtype=np.int64),
                 np.ascontiguousarray(tri.neighbors.ravel(), dtype=np.int64))


def graph_from_edges(n, edges):
    """Undirected graph from an (e, 2) edge list."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.sort_indices()
    return Graph(A.indptr.astype(np.int64), A.indices.astype(np.int64))


def disjoint_union(graphs):
    indptr = [np.zeros(1, dtype=np.int64)]
    indices = []
    node_off = 0
    edge_off = 0
    offsets = []
    for g in graphs:
        offsets.append(node_off)
        indptr.append(g.indptr[1:] + edge_off)
        indices.append(g.indices + node_off)
        node_off += g.n_nodes
        edge_off += len(g.indices)
    return Graph(np.concatenate(indptr), np.concatenate(indices)), np.array(offsets)


@njit(cache=True)
def _hop_levels(indptr, indices, sources, depth, level):
    """Multi-source BFS. Returns nodes ordered by level and per-level counts.

    ``level`` is scratch of size n filled with -1; it is restored before returning.
    """
    order = np.empty(indices.shape[0] + sources.shape[0], dtype=np.int64)
    n = 0
    for s in sources:
        if level[s] < 0:
            level[s] = 0
            order[n] = s
            n += 1
    counts = np.zeros(depth + 1, dtype=np.int64)
    counts[0] = n
    head = 0
    for d in range(depth):
        end = n
        while head < end:
            u = order[head]
            head += 1
            for q in range(indptr[u], indptr[u + 1]):
                v = indices[q]
                if level[v] < 0:
                    level[v] = d + 1
                    if n >= order.shape[0]:
                        tmp = np.empty(2 * order.shape[0], dtype=np.int64)
                        tmp[:n] = order[:n]
                        order = tmp
                    order[n] = v
                    n += 1
        counts[d + 1] = n - end
    out = order[:n].copy()
    for i in range(n):
        level[out[i]] = -1
    return out, counts


def hop(graph, center, depth, scratch=None):
    """Nodes within ``depth`` edges of ``center`` (or of any node in an array of centers), by level."""
    level = np.full(graph.n_nodes, -1, dtype=np.int64) if scratch is None else scratch
    src = np.atleast_1d(np.asarray(center, dtype=np.int64))
    return _hop_levels(graph.indptr, graph.indices, src, int(depth), level)


@dataclass
class Subgraph:
    nodes: np.ndarray      # global ids, ordered by hop level (center first)
    levels: np.ndarray     # number of nodes at each hop level
    graph: Graph           # induced subgraph on local ids
    center: int = 0        # local index of the center


def sample_subgraph(graph, center, depth=4):
    """Induced subgraph on hop(center, depth)."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    nodes, levels = hop(graph, center, depth)
    local = np.full(graph.n_nodes, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    rows, cols = [], []
    for i, u in enumerate(nodes):
        nb = local[graph.neighbors(u)]
        nb = nb[nb >= 0]
        rows.append(np.full(len(nb), i))
        cols.append(nb)
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    A.sort_indices()
    return Subgraph(nodes, levels, Graph(A.indptr.astype(np.int64), A.indices.astype(np.int64)), 0)


@dataclass
class Plan:
    nodes: list        # nodes[k]: global node ids of S_k, k = 0..L
    select: list       # select[k]: positions of S_{k+1} inside S_k
    mean: list         # mean[k]: sparse |S_{k+1}| x |S_k| neighbor-mean operator

    @property
    def n_layers(self):
        return len(self.mean)

    @property
    def outputs(self):
        return self.nodes[-1]


def mean_operator(graph):
    deg = graph.degree().astype(np.float64)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    data = np.repeat(inv, graph.degree())
    n = graph.n_nodes
    return sp.csr_matrix((data, graph.indices, graph.indptr), shape=(n, n))


def full_plan(graph, n_layers):
    ids = np.arange(graph.n_nodes, dtype=np.int64)
    M = mean_operator(graph)
    return Plan([ids] * (n_layers + 1), [ids] * n_layers, [M] * n_layers)


@njit(cache=True)
def _block_rows(indptr, indices, nodes, n_rows, pos):
    """COO entries of the neighbor mean for the first n_rows block nodes."""
    n = nodes.shape[0]
    for i in range(n):
        pos[nodes[i]] = i
    total = 0
    for i in range(n_rows):
        u = nodes[i]
        total += indptr[u + 1] - indptr[u]
    r = np.empty(total, dtype=np.int64)
    c = np.empty(total, dtype=np.int64)
    w = np.empty(total)
    q = 0
    for i in range(n_rows):
        u = nodes[i]
        d = indptr[u + 1] - indptr[u]
        for e in range(indptr[u], indptr[u + 1]):
            r[q] = i
            c[q] = pos[indices[e]]
            w[q] = 1.0 / d
            q += 1
    for i in range(n):
        pos[nodes[i]] = -1
    return r, c, w


def blocks_plan(graph, blocks, n_layers):
    """Plan for independent blocks laid side by side.

    Each block is ``(nodes, levels)`` from :func:`hop` with depth ``n_layers``;
    its S_k part is the prefix of nodes within n_layers - k hops.
    """
    pos = np.full(graph.n_nodes, -1, dtype=np.int64)
    L = n_layers
    prefix = [np.cumsum(lv) for lv in (b[1] for b in blocks)]
    nodes_k, select_k, mean_k = [], [], []
    for k in range(L + 1):
        nodes_k.append(np.concatenate([b[0][:p[L - k]] for b, p in zip(blocks, prefix)]))
    for k in range(L):
        sel, rr, cc, ww = [], [], [], []
        off_in = 0
        off_out = 0
        for (nodes, _), p in zip(blocks, prefix):
            n_in = p[L - k]
            n_out = p[L - k - 1]
            sel.append(off_in + np.arange(n_out))
            r, c, w = _block_rows(graph.indptr, graph.indices, nodes[:n_in], n_out, pos)
            if len(c) and c.min() < 0:
                raise ValueError("plan block is not closed under neighborhoods")
            rr.append(r + off_out)
            cc.append(c + off_in)
            ww.append(w)
            off_in += n_in
            off_out += n_out
        select_k.append(np.concatenate(sel))
        M = sp.csr_matrix((np.concatenate(ww), (np.concatenate(rr), np.concatenate(cc))),
                          shape=(off_out, off_in))
        mean_k.append(M)
    return Plan(nodes_k, select_k, mean_k)


def nodewise_plan(graph, centers, n_layers):
    """Plan computing outputs for ``centers`` only (deduplicated union of their receptive fields)."""
    return blocks_plan(graph, [hop(graph, centers, n_layers)], n_layers)


def batch_plan(graph, centers, n_layers):
    """One independent block per center (duplicates allowed), as used for training."""
    scratch = np.full(graph.n_nodes, -1, dtype=np.int64)
    blocks = [hop(graph, c, n_layers, scratch) for c in centers]
    return blocks_plan(graph, blocks, n_layers)
