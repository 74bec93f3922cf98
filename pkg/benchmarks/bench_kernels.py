"""Benchmark the hot kernels: numba @njit vs the pure-numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--size 320x240] [--repeats 3]

The same function bodies run on both paths (see xslit._kernels), so this
measures compilation payoff only; outputs are asserted identical first.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from xslit._kernels import HAS_NUMBA, _felz_merge_impl, _maxflow_impl


def build_segmentation_case(h: int, w: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    # blocky image with noise: realistic merge workload
    img = np.repeat(np.repeat(rng.integers(0, 5, size=(h // 8, w // 8)), 8, 0), 8, 1)
    img = img[:h, :w] * 50.0 + rng.normal(0, 2.0, size=(h, w))
    rgb = np.stack([img] * 3, axis=2)
    n = h * w
    idx = np.arange(n).reshape(h, w)
    eu = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()]).astype(np.int64)
    ev = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()]).astype(np.int64)
    flat = rgb.reshape(n, 3)
    ew = np.linalg.norm(flat[eu] - flat[ev], axis=1)
    order = np.lexsort((np.arange(eu.shape[0]), ew))
    return eu[order], ev[order], ew[order], n


def build_flow_case(n_nodes: int = 400, seed: int = 0):
    rng = np.random.default_rng(seed)
    arcs = []
    for u in range(1, n_nodes - 1):  # grid-like band structure plus terminals
        arcs.append((0, u, float(rng.integers(1, 20))))
        arcs.append((u, n_nodes - 1, float(rng.integers(1, 20))))
        for dv in (1, 7):
            if u + dv < n_nodes - 1:
                arcs.append((u, u + dv, float(rng.integers(1, 10))))
    m = len(arcs)
    edge_to = np.empty(2 * m, dtype=np.int64)
    cap = np.zeros(2 * m, dtype=np.float64)
    tails = np.empty(2 * m, dtype=np.int64)
    for i, (u, v, c) in enumerate(arcs):
        edge_to[2 * i] = v
        edge_to[2 * i + 1] = u
        cap[2 * i] = c
        tails[2 * i] = u
        tails[2 * i + 1] = v
    order = np.argsort(tails, kind="stable").astype(np.int64)
    start = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(start, tails + 1, 1)
    return np.cumsum(start), order, edge_to, cap


def timeit(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", default="320x240")
    parser.add_argument("--flow-nodes", type=int, default=400)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    w, h = (int(v) for v in args.size.split("x"))

    if not HAS_NUMBA:
        print("numba not importable; only the numpy path can run")

    rows = []

    eu, ev, ew, n = build_segmentation_case(h, w)
    py_parent = _felz_merge_impl(eu, ev, ew, n, 300.0, 20)
    t_py = timeit(lambda: _felz_merge_impl(eu, ev, ew, n, 300.0, 20), args.repeats)
    t_nb = None
    if HAS_NUMBA:
        from numba import njit

        felz_nb = njit(cache=True)(_felz_merge_impl)
        nb_parent = felz_nb(eu, ev, ew, n, 300.0, 20)
        assert np.array_equal(py_parent, nb_parent), "kernel paths disagree"
        t_nb = timeit(lambda: felz_nb(eu, ev, ew, n, 300.0, 20), args.repeats)
    rows.append((f"felz_merge {w}x{h} ({eu.shape[0]} edges)", t_py, t_nb))

    graph = build_flow_case(args.flow_nodes)
    sink = args.flow_nodes - 1

    def run_py():
        caps = graph[3].copy()
        return _maxflow_impl(graph[0], graph[1], graph[2], caps, 0, sink)

    f_py, _ = run_py()
    t_py = timeit(run_py, args.repeats)
    t_nb = None
    if HAS_NUMBA:
        from numba import njit

        maxflow_nb = njit(cache=True)(_maxflow_impl)

        def run_nb():
            caps = graph[3].copy()
            return maxflow_nb(graph[0], graph[1], graph[2], caps, 0, sink)

        f_nb, _ = run_nb()
        assert abs(f_py - f_nb) < 1e-9, "kernel paths disagree"
        t_nb = timeit(run_nb, args.repeats)
    rows.append((f"maxflow {args.flow_nodes} nodes (flow={f_py:.0f})", t_py, t_nb))

    print(f"{'kernel':<42} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, py, nb in rows:
        if nb is None:
            print(f"{name:<42} {py * 1e3:>8.1f}ms {'-':>10} {'-':>8}")
        else:
            print(f"{name:<42} {py * 1e3:>8.1f}ms {nb * 1e3:>8.1f}ms {py / nb:>7.1f}x")


if __name__ == "__main__":
    main()
