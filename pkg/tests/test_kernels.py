"""The numba and pure-python kernel paths must agree bit-for-bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from xslit import _kernels
from xslit._kernels import _felz_merge_impl, _maxflow_impl


def build_flow_graph(n_nodes, arcs):
    """CSR paired-arc graph from (tail, head, capacity) triples."""
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


class TestMaxflow:
    def test_textbook_network(self):
        # s=0, a=1, b=2, t=3; max flow 5 via 2+2+1
        arcs = [(0, 1, 3.0), (0, 2, 2.0), (1, 2, 1.0), (1, 3, 2.0), (2, 3, 3.0)]
        start, order, edge_to, cap = build_flow_graph(4, arcs)
        flow, reachable = _maxflow_impl(start, order, edge_to, cap, 0, 3)
        assert flow == pytest.approx(5.0)
        assert reachable[0] and not reachable[3]

    def test_disconnected_sink(self):
        arcs = [(0, 1, 4.0)]
        start, order, edge_to, cap = build_flow_graph(3, arcs)
        flow, reachable = _maxflow_impl(start, order, edge_to, cap, 0, 2)
        assert flow == 0.0
        assert list(reachable) == [True, True, False]

    def test_paths_agree(self, rng):
        if not _kernels.HAS_NUMBA:
            pytest.skip("numba unavailable")
        from numba import njit

        jitted = njit(cache=True)(_maxflow_impl)
        for _ in range(25):
            n = int(rng.integers(4, 12))
            arcs = []
            for u in range(n):
                for v in range(n):
                    if u != v and rng.random() < 0.35:
                        arcs.append((u, v, float(rng.integers(1, 10))))
            if not arcs:
                continue
            g1 = build_flow_graph(n, arcs)
            g2 = tuple(a.copy() for a in g1)
            f1, r1 = _maxflow_impl(*g1, 0, n - 1)
            f2, r2 = jitted(*g2, 0, n - 1)
            assert f1 == pytest.approx(f2)
            assert np.array_equal(r1, r2)
            assert np.array_equal(g1[3], g2[3])  # residuals identical too


class TestFelzMerge:
    def _random_case(self, rng, h=12, w=10):
        img = rng.integers(0, 4, size=(h, w), dtype=np.int64) * 60
        rgb = np.stack([img] * 3, axis=2).astype(np.float64)
        n = h * w
        idx = np.arange(n).reshape(h, w)
        eu = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()]).astype(np.int64)
        ev = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()]).astype(np.int64)
        flat = rgb.reshape(n, 3)
        ew = np.linalg.norm(flat[eu] - flat[ev], axis=1)
        order = np.lexsort((np.arange(eu.shape[0]), ew))
        return eu[order], ev[order], ew[order], n

    def test_paths_agree(self, rng):
        if not _kernels.HAS_NUMBA:
            pytest.skip("numba unavailable")
        from numba import njit

        jitted = njit(cache=True)(_felz_merge_impl)
        for _ in range(10):
            eu, ev, ew, n = self._random_case(rng)
            a = _felz_merge_impl(eu, ev, ew, n, 100.0, 4)
            b = jitted(eu, ev, ew, n, 100.0, 4)
            assert np.array_equal(a, b)

    def test_all_equal_pixels_single_component(self):
        n = 16
        eu = np.arange(n - 1, dtype=np.int64)
        ev = eu + 1
        ew = np.zeros(n - 1)
        parent = _felz_merge_impl(eu, ev, ew, n, 1.0, 1)
        assert len(set(parent.tolist())) == 1


class TestEnvFlag:
    def test_flag_forces_numpy_path(self):
        code = "from xslit._kernels import USE_NUMBA; print(USE_NUMBA)"
        env = dict(os.environ, XSLIT_NUMBA="0")
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.stdout.strip() == "False"

    def test_default_uses_numba_when_available(self):
        if not _kernels.HAS_NUMBA:
            pytest.skip("numba unavailable")
        env = {k: v for k, v in os.environ.items() if k != "XSLIT_NUMBA"}
        code = "from xslit._kernels import USE_NUMBA; print(USE_NUMBA)"
        out = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        assert out.stdout.strip() == "True"
