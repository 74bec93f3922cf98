"""Sparse-to-dense depth propagation.

Pipeline: segment the image into superpixels (graph-based merging with the
adaptive threshold k/|C|), seed every region with a depth blended from the
sparse anchors by geodesic distance over the region-adjacency graph, then
clean the field up with a discrete MRF solved by alpha-expansion graph
cuts.

Energy model (all terms absolute-valued so the MRF is a well-posed metric
problem):

    E(U) = sum_i c_i * |U_i - V_i|
         + lambda * sum_(i,j) w_ij * min(|U_i - U_j|, trunc)

with w_ij = boundary_length * exp(-|color_i - color_j|^2 / (2 sigma_c^2)).
Regions with no reachable anchor get c_i = 0 and take their depth purely
from smoothness.  Each expansion move is one max-flow problem on the
region graph (see :mod:`xslit._kernels`); the total energy never increases
across sweeps.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidInput, NoAnchors
from .raster import RasterImage, write_pgm16

_LOW_WEIGHT = 1e-12


@dataclass(frozen=True)
class SuperpixelGraph:
    """Partition of an image into regions plus their adjacency structure."""

    labels: np.ndarray  # (H, W) int32 region ids, 0..n_regions-1
    mean_color: np.ndarray  # (R, 3) float64
    centroid: np.ndarray  # (R, 2) float64 (row, col)
    pixel_count: np.ndarray  # (R,) int64
    edges: np.ndarray  # (E, 2) int64, i < j, each undirected pair once
    boundary_length: np.ndarray  # (E,) int64 shared 4-neighbor pairs

    @property
    def n_regions(self) -> int:
        return int(self.mean_color.shape[0])


def segment_superpixels(image, k: float = 500.0, min_size: int = 20) -> SuperpixelGraph:
    """Graph-based superpixel segmentation of an RGB image.

    4-connected pixel edges weighted by Euclidean color difference are
    processed in ascending weight order (ties broken by construction
    index, so the labeling is deterministic); components merge while the
    edge weight stays under both adaptive thresholds, then regions smaller
    than ``min_size`` are absorbed into their nearest neighbor.
    """
    if isinstance(image, RasterImage):
        image = image.pixels
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidInput("segmentation expects an (H, W, 3) image")
    if img.size == 0:
        raise InvalidInput("segmentation expects a non-empty image")
    if k <= 0:
        raise InvalidInput(f"segmentation scale k must be positive, got {k}")
    h, w = img.shape[:2]
    n = h * w
    rgb = img.reshape(n, 3).astype(np.float64)

    idx = np.arange(n, dtype=np.int64).reshape(h, w)
    right_u = idx[:, :-1].ravel()
    right_v = idx[:, 1:].ravel()
    down_u = idx[:-1, :].ravel()
    down_v = idx[1:, :].ravel()
    eu = np.concatenate([right_u, down_u])
    ev = np.concatenate([right_v, down_v])
    ew = np.linalg.norm(rgb[eu] - rgb[ev], axis=1)

    order = np.lexsort((np.arange(eu.shape[0]), ew))
    parent = _kernels.felz_merge(
        eu[order], ev[order], ew[order], n, float(k), int(min_size)
    )

    roots, labels_flat = np.unique(parent, return_inverse=True)
    labels = labels_flat.reshape(h, w).astype(np.int32)
    n_regions = roots.shape[0]

    counts = np.bincount(labels_flat, minlength=n_regions)
    mean_color = np.stack(
        [
            np.bincount(labels_flat, weights=rgb[:, c], minlength=n_regions) / counts
            for c in range(3)
        ],
        axis=1,
    )
    rows, cols = np.divmod(np.arange(n, dtype=np.int64), w)
    centroid = np.stack(
        [
            np.bincount(labels_flat, weights=rows, minlength=n_regions) / counts,
            np.bincount(labels_flat, weights=cols, minlength=n_regions) / counts,
        ],
        axis=1,
    )

    la = labels_flat[eu]
    lb = labels_flat[ev]
    cross = la != lb
    lo = np.minimum(la[cross], lb[cross]).astype(np.int64)
    hi = np.maximum(la[cross], lb[cross]).astype(np.int64)
    keys = lo * n_regions + hi
    uniq, counts_e = np.unique(keys, return_counts=True)
    edges = np.stack([uniq // n_regions, uniq % n_regions], axis=1)

    return SuperpixelGraph(
        labels=labels,
        mean_color=mean_color,
        centroid=centroid,
        pixel_count=counts.astype(np.int64),
        edges=edges,
        boundary_length=counts_e.astype(np.int64),
    )


@dataclass(frozen=True)
class DepthAnchor:
    """A sparse depth estimate tied to a region (directly or via a pixel)."""

    depth: float
    region_id: int | None = None
    pixel: tuple[int, int] | None = None  # (row, col)
    confidence: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.depth):
            raise InvalidInput("anchor depth must be finite")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInput(f"confidence must be in [0, 1], got {self.confidence}")
        if self.region_id is None and self.pixel is None:
            raise InvalidInput("anchor needs a region id or a pixel")

    def resolve_region(self, graph: SuperpixelGraph) -> int:
        if self.region_id is not None:
            if not 0 <= self.region_id < graph.n_regions:
                raise InvalidInput(f"anchor region {self.region_id} out of range")
            return int(self.region_id)
        row, col = self.pixel
        h, w = graph.labels.shape
        if not (0 <= row < h and 0 <= col < w):
            raise InvalidInput(f"anchor pixel {self.pixel} outside the image")
        return int(graph.labels[row, col])


@dataclass(frozen=True)
class BlendResult:
    v_init: np.ndarray  # (R,) blended initial depth
    total_weight: np.ndarray  # (R,) sum of anchor weights
    low_confidence: np.ndarray  # (R,) bool, no anchor effectively reachable


def _adjacency_with_costs(graph: SuperpixelGraph):
    costs = np.linalg.norm(
        graph.mean_color[graph.edges[:, 0]] - graph.mean_color[graph.edges[:, 1]],
        axis=1,
    )
    adj: list[list[tuple[int, float]]] = [[] for _ in range(graph.n_regions)]
    for (i, j), c in zip(graph.edges, costs):
        adj[int(i)].append((int(j), float(c)))
        adj[int(j)].append((int(i), float(c)))
    return adj


def _geodesic_distances(adj, start: int, n: int) -> np.ndarray:
    dist = np.full(n, np.inf)
    dist[start] = 0.0
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, c in adj[u]:
            nd = d + c
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def blend_initial(graph: SuperpixelGraph, anchors, sigma_g: float = 30.0) -> BlendResult:
    """Seed every region with an anchor-depth blend weighted by geodesic distance.

    Geodesic distance runs over the region adjacency graph with mean-color
    difference as edge cost, so blending respects appearance boundaries.
    Regions whose total weight underflows are flagged low-confidence and
    fall back to the plain anchor mean.
    """
    anchors = list(anchors)
    if not anchors:
        raise NoAnchors("depth blending needs at least one anchor")
    if sigma_g < 0:
        raise InvalidInput(f"sigma_g must be >= 0, got {sigma_g}")
    n = graph.n_regions
    adj = _adjacency_with_costs(graph)

    num = np.zeros(n)
    den = np.zeros(n)
    for anchor in anchors:
        region = anchor.resolve_region(graph)
        dist = _geodesic_distances(adj, region, n)
        if sigma_g == 0.0:
            weight = np.where(dist == 0.0, 1.0, 0.0)
        else:
            with np.errstate(over="ignore"):
                weight = np.exp(-dist / sigma_g)
        weight = anchor.confidence * weight
        num += weight * anchor.depth
        den += weight

    low = den < _LOW_WEIGHT
    fallback = float(np.mean([a.depth for a in anchors]))
    v = np.where(low, fallback, num / np.where(low, 1.0, den))
    return BlendResult(v_init=v, total_weight=den, low_confidence=low)


@dataclass(frozen=True)
class MrfProblem:
    """Discrete depth-labeling problem on the region graph."""

    v_init: np.ndarray  # (R,) target depths
    edges: np.ndarray  # (E, 2) region pairs
    weights: np.ndarray  # (E,) w_ij >= 0
    labels: np.ndarray  # (L,) sorted distinct depth values
    lam: float = 0.5
    data_weight: np.ndarray | None = None  # (R,) c_i, default all ones
    trunc: float = math.inf  # smoothness truncation threshold

    def __post_init__(self):
        v = np.asarray(self.v_init, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "v_init", v)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        if labels.ndim != 1 or labels.shape[0] < 2:
            raise InvalidInput("need at least 2 depth labels")
        if np.any(np.diff(labels) <= 0):
            raise InvalidInput("labels must be sorted and distinct")
        if weights.shape[0] != edges.shape[0]:
            raise InvalidInput("one weight per edge required")
        if np.any(weights < 0):
            raise InvalidInput("edge weights must be >= 0")
        if self.lam < 0:
            raise InvalidInput("lambda must be >= 0")
        if self.trunc <= 0:
            raise InvalidInput("truncation threshold must be positive")
        if self.data_weight is None:
            object.__setattr__(self, "data_weight", np.ones(v.shape[0]))
        else:
            c = np.asarray(self.data_weight, dtype=float)
            if c.shape != v.shape or np.any(c < 0):
                raise InvalidInput("data weights must be non-negative, one per region")
            object.__setattr__(self, "data_weight", c)

    @property
    def n_regions(self) -> int:
        return int(self.v_init.shape[0])


def default_labels(depths, count: int = 64, pad: float = 0.1) -> np.ndarray:
    """Uniform depth labels spanning the anchors, padded by ``pad`` on each side."""
    depths = np.asarray(list(depths), dtype=float)
    if depths.size == 0:
        raise NoAnchors("cannot derive depth labels without anchors")
    lo, hi = float(depths.min()), float(depths.max())
    span = hi - lo
    if span == 0.0:
        span = max(abs(lo), 1.0)
    lo -= pad * span
    hi += pad * span
    return np.linspace(lo, hi, count)


def mrf_energy(problem: MrfProblem, u_values: np.ndarray) -> float:
    """Total MRF energy of a depth assignment (label values, not indices)."""
    u = np.asarray(u_values, dtype=float)
    data = float(np.sum(problem.data_weight * np.abs(u - problem.v_init)))
    diff = np.abs(u[problem.edges[:, 0]] - u[problem.edges[:, 1]])
    smooth = float(np.sum(problem.weights * np.minimum(diff, problem.trunc)))
    return data + problem.lam * smooth


def _expansion_move(problem: MrfProblem, u_idx: np.ndarray, alpha_idx: int) -> np.ndarray:
    """One alpha-expansion step: returns the new label-index assignment."""
    labels = problem.labels
    r = problem.n_regions
    cur = labels[u_idx]
    alpha = labels[alpha_idx]
    c = problem.data_weight
    lam = problem.lam
    trunc = problem.trunc

    theta0 = c * np.abs(cur - problem.v_init)
    theta1 = c * np.abs(alpha - problem.v_init)

    i_arr = problem.edges[:, 0]
    j_arr = problem.edges[:, 1]
    wl = lam * problem.weights
    A = wl * np.minimum(np.abs(cur[i_arr] - cur[j_arr]), trunc)
    B = wl * np.minimum(np.abs(cur[i_arr] - alpha), trunc)
    C = wl * np.minimum(np.abs(alpha - cur[j_arr]), trunc)

    # pairwise decomposition: E = A + (C-A)[x_i] + (-C)[x_j] + (B+C-A)[(1-x_i) x_j]
    np.add.at(theta1, i_arr, C - A)
    np.add.at(theta1, j_arr, -C)
    pair_cap = np.maximum(B + C - A, 0.0)  # submodular for a metric; clip rounding dust

    source = r
    sink = r + 1
    d = theta1 - theta0
    pos = d > 0
    neg = d < 0

    tails = [np.full(np.count_nonzero(pos), source), np.flatnonzero(neg), i_arr]
    heads = [np.flatnonzero(pos), np.full(np.count_nonzero(neg), sink), j_arr]
    caps = [d[pos], -d[neg], pair_cap]

    fwd_tail = np.concatenate(tails)
    fwd_head = np.concatenate(heads)
    fwd_cap = np.concatenate(caps)

    m = fwd_tail.shape[0]
    edge_to = np.empty(2 * m, dtype=np.int64)
    cap = np.zeros(2 * m, dtype=np.float64)
    edge_to[0::2] = fwd_head
    edge_to[1::2] = fwd_tail
    cap[0::2] = fwd_cap

    arc_tail = np.empty(2 * m, dtype=np.int64)
    arc_tail[0::2] = fwd_tail
    arc_tail[1::2] = fwd_head
    order = np.argsort(arc_tail, kind="stable")
    adj_edge = order.astype(np.int64)
    adj_start = np.zeros(r + 3, dtype=np.int64)
    np.add.at(adj_start, arc_tail + 1, 1)
    adj_start = np.cumsum(adj_start)

    _, reachable = _kernels.maxflow(adj_start, adj_edge, edge_to, cap, source, sink)
    take_alpha = ~reachable[:r]  # sink side = switch to alpha
    return np.where(take_alpha, alpha_idx, u_idx)


def solve_mrf(problem: MrfProblem) -> np.ndarray:
    """Minimize the MRF energy by alpha-expansion; returns per-region depths.

    Starts from the nearest label to each region's initial depth, sweeps
    all labels with expansion moves (each one binary max-flow), and stops
    when a full sweep brings no energy improvement.  Energy monotonicity
    across moves is asserted in debug mode.
    """
    labels = problem.labels
    u_idx = np.clip(
        np.searchsorted(labels, problem.v_init), 1, labels.shape[0] - 1
    )
    below = labels[u_idx - 1]
    here = labels[u_idx]
    u_idx = np.where(
        np.abs(problem.v_init - below) <= np.abs(here - problem.v_init),
        u_idx - 1,
        u_idx,
    )

    energy = mrf_energy(problem, labels[u_idx])
    tol = 1e-9 * max(1.0, abs(energy))
    improved = True
    while improved:
        improved = False
        for alpha_idx in range(labels.shape[0]):
            new_idx = _expansion_move(problem, u_idx, alpha_idx)
            new_energy = mrf_energy(problem, labels[new_idx])
            if __debug__:
                assert new_energy <= energy + max(1e-6, 1e-9 * abs(energy)), (
                    f"expansion move increased energy: {energy} -> {new_energy}"
                )
            if new_energy < energy - tol:
                u_idx = new_idx
                energy = new_energy
                improved = True
    return labels[u_idx]


def expand_to_pixels(graph: SuperpixelGraph, u_values: np.ndarray) -> np.ndarray:
    """Per-pixel depth map: every pixel takes its region's depth."""
    u = np.asarray(u_values, dtype=float)
    if u.shape[0] != graph.n_regions:
        raise InvalidInput("one depth per region required")
    return u[graph.labels]


def export_depth_map(depth: np.ndarray, pgm_path, sidecar_path) -> None:
    """Write a depth map as 16-bit PGM plus a JSON range sidecar.

    Depths quantize linearly to [0, 65535] over [depth_min, depth_max];
    NaN pixels (nothing rendered there) store 0.
    """
    depth = np.asarray(depth, dtype=float)
    finite = np.isfinite(depth)
    if not finite.any():
        raise InvalidInput("depth map has no finite values")
    dmin = float(depth[finite].min())
    dmax = float(depth[finite].max())
    span = dmax - dmin
    scaled = np.zeros(depth.shape, dtype=np.uint16)
    if span > 0:
        q = np.rint((depth[finite] - dmin) / span * 65535.0)
        scaled[finite] = q.astype(np.uint16)
    write_pgm16(pgm_path, scaled)
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump({"depth_min": dmin, "depth_max": dmax}, fh, indent=2)
        fh.write("\n")


def load_depth_map(pgm_path, sidecar_path) -> np.ndarray:
    """Inverse of :func:`export_depth_map` (quantization error aside)."""
    from .raster import read_pgm16

    raw = read_pgm16(pgm_path).astype(float)
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    dmin = float(meta["depth_min"])
    dmax = float(meta["depth_max"])
    return raw / 65535.0 * (dmax - dmin) + dmin


def export_labels_pgm(graph: SuperpixelGraph, path) -> None:
    """Debug view of the segmentation: region ids as 16-bit gray."""
    write_pgm16(path, (graph.labels % 65536).astype(np.uint16))
