"""Hot numeric kernels: superpixel merging and max-flow.

Both kernels are sequential array loops, so they are compiled with numba's
``@njit`` when available.  The pure-numpy interpretation of the *same*
function bodies remains the fallback and can be forced with the
environment flag ``XSLIT_NUMBA=0`` (``XSLIT_NUMBA=1`` makes a missing
numba an error instead of a silent fallback).  Outputs are bit-identical
on both paths; ``benchmarks/bench_kernels.py`` compares their speed.

``XSLIT_THREADS`` caps numba's thread pool.  The kernels themselves are
single-threaded, so results never depend on the thread count.
"""

from __future__ import annotations

import os

import numpy as np


def _read_flag(name: str) -> str:
    return os.environ.get(name, "").strip().lower()


def _numba_setting() -> tuple[bool, bool]:
    """(has_numba, use_numba) from the environment."""
    flag = _read_flag("XSLIT_NUMBA")
    try:
        import numba  # noqa: F401

        has = True
    except ImportError:
        has = False
    if flag in ("0", "false", "off"):
        return has, False
    if flag in ("1", "true", "on") and not has:
        raise ImportError("XSLIT_NUMBA=1 requires numba, which is not importable")
    return has, has


HAS_NUMBA, USE_NUMBA = _numba_setting()

if USE_NUMBA:
    from numba import njit

    threads = os.environ.get("XSLIT_THREADS", "").strip()
    if threads:
        import numba

        try:
            requested = int(threads)
        except ValueError:
            requested = 0
        if requested >= 1:
            numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))


def _maybe_jit(fn):
    if USE_NUMBA:
        return njit(cache=True)(fn)
    return fn


def _felz_merge_impl(edge_u, edge_v, edge_w, n_nodes, k, min_size):
    """Graph-based segmentation merge pass over weight-sorted edges.

    Components merge while the joining edge weight stays under both
    adaptive thresholds int(C) + k/|C|; a second pass absorbs components
    smaller than min_size.  Returns the flattened parent array (each entry
    its component root).
    """
    parent = np.arange(n_nodes, dtype=np.int64)
    size = np.ones(n_nodes, dtype=np.int64)
    thr = np.full(n_nodes, k, dtype=np.float64)

    for i in range(edge_u.shape[0]):
        a = edge_u[i]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = edge_v[i]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b and edge_w[i] <= thr[a] and edge_w[i] <= thr[b]:
            if size[a] < size[b] or (size[a] == size[b] and b < a):
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            thr[a] = edge_w[i] + k / size[a]

    if min_size > 1:
        for i in range(edge_u.shape[0]):
            a = edge_u[i]
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            b = edge_v[i]
            while parent[b] != b:
                parent[b] = parent[parent[b]]
                b = parent[b]
            if a != b and (size[a] < min_size or size[b] < min_size):
                if size[a] < size[b] or (size[a] == size[b] and b < a):
                    a, b = b, a
                parent[b] = a
                size[a] += size[b]

    for v in range(n_nodes):
        r = v
        while parent[r] != r:
            r = parent[r]
        w = v
        while parent[w] != r:
            nxt = parent[w]
            parent[w] = r
            w = nxt
    return parent


def _maxflow_impl(adj_start, adj_edge, edge_to, cap, source, sink):
    """Edmonds-Karp max-flow on a paired-arc CSR graph.

    Arcs come in pairs (arc ^ 1 is the reverse); ``cap`` holds residual
    capacities and is mutated in place.  Returns (flow value, S-side mask
    of the minimum cut).
    """
    n = adj_start.shape[0] - 1
    parent_edge = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    eps = 1e-12
    total = 0.0

    while True:
        for i in range(n):
            parent_edge[i] = -1
        parent_edge[source] = -2
        qh = 0
        qt = 0
        queue[qt] = source
        qt += 1
        found = False
        while qh < qt and not found:
            u = queue[qh]
            qh += 1
            for ei in range(adj_start[u], adj_start[u + 1]):
                e = adj_edge[ei]
                v = edge_to[e]
                if parent_edge[v] == -1 and cap[e] > eps:
                    parent_edge[v] = e
                    if v == sink:
                        found = True
                        break
                    queue[qt] = v
                    qt += 1
        if not found:
            break

        bottleneck = np.inf
        v = sink
        while v != source:
            e = parent_edge[v]
            if cap[e] < bottleneck:
                bottleneck = cap[e]
            v = edge_to[e ^ 1]
        v = sink
        while v != source:
            e = parent_edge[v]
            cap[e] -= bottleneck
            cap[e ^ 1] += bottleneck
            v = edge_to[e ^ 1]
        total += bottleneck

    reachable = np.zeros(n, dtype=np.bool_)
    reachable[source] = True
    qh = 0
    qt = 0
    queue[qt] = source
    qt += 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for ei in range(adj_start[u], adj_start[u + 1]):
            e = adj_edge[ei]
            v = edge_to[e]
            if not reachable[v] and cap[e] > eps:
                reachable[v] = True
                queue[qt] = v
                qt += 1
    return total, reachable


felz_merge = _maybe_jit(_felz_merge_impl)
maxflow = _maybe_jit(_maxflow_impl)
