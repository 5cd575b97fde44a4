"""Flow neighborhood graph and the shortest-path flow metric.

Nodes are sampled frames; an edge exists only where flow estimation
passes the mutual consistency gate in both directions.  Edge weight is
the RMS flow magnitude, symmetrized by averaging the two directions.
Pairwise distances come from the min-plus closure of the weight matrix,
iterated to a fixed point so the metric axioms hold exactly in floating
point; path queries run a Dijkstra whose ties resolve to the
lexicographically smallest node sequence.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .flow import FlowConfig, flow_norm, flow_pair
from .image import FlowField, Image, l2_distance


@dataclass(frozen=True)
class FlowEdge:
    """Consistent link between nodes i < j."""

    i: int
    j: int
    weight: float
    asymmetry: float
    flow_fwd: FlowField
    flow_bwd: FlowField
    fb_fwd: float
    fb_bwd: float


@dataclass(frozen=True)
class FlowGraph:
    n_nodes: int
    edges: dict[tuple[int, int], FlowEdge]
    images: tuple[Image, ...] | None = None
    exhaustive: bool = True

    def neighbors(self, i: int) -> list[int]:
        out = [b for (a, b) in self.edges if a == i] + [a for (a, b) in self.edges if b == i]
        return sorted(out)

    def edge(self, i: int, j: int) -> FlowEdge:
        return self.edges[(i, j) if i < j else (j, i)]

    def hop_flow(self, i: int, j: int) -> FlowField:
        """Flow from node i to node j along an existing edge."""
        e = self.edge(i, j)
        return e.flow_fwd if i < j else e.flow_bwd

    def weight_matrix(self) -> np.ndarray:
        w = np.full((self.n_nodes, self.n_nodes), np.inf)
        np.fill_diagonal(w, 0.0)
        for (i, j), e in self.edges.items():
            w[i, j] = w[j, i] = e.weight
        return w


def build_graph(
    images: list[Image] | tuple[Image, ...],
    cfg: FlowConfig = FlowConfig(),
    pairs: list[tuple[int, int]] | None = None,
    support: np.ndarray | None = None,
) -> FlowGraph:
    """Attempt flows between frame pairs and keep the mutually consistent ones.

    ``pairs=None`` tries every unordered pair (the reference behavior);
    passing a candidate subset is a shortcut and is flagged on the graph.
    ``support`` optionally restricts the RMS weight to a pixel mask.
    """
    images = tuple(images)
    n = len(images)
    if n < 1:
        raise ValueError("graph needs at least one node")
    if pairs is None:
        wanted = [(i, j) for i in range(n) for j in range(i + 1, n)]
        exhaustive = True
    else:
        wanted = sorted({(min(i, j), max(i, j)) for i, j in pairs})
        for i, j in wanted:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValueError(f"bad candidate pair ({i}, {j}) for {n} nodes")
        exhaustive = False

    edges: dict[tuple[int, int], FlowEdge] = {}
    for i, j in wanted:
        fwd, bwd = flow_pair(images[i], images[j], cfg)
        if not (fwd.consistent and bwd.consistent):
            continue
        a = flow_norm(fwd.flow, support)
        b = flow_norm(bwd.flow, support)
        weight = 0.5 * (a + b)
        asym = abs(a - b) / weight if weight > 0 else 0.0
        edges[(i, j)] = FlowEdge(i, j, weight, asym, fwd.flow, bwd.flow, fwd.fb_error, bwd.fb_error)
    return FlowGraph(n, edges, images, exhaustive)


def graph_from_weights(weights: np.ndarray) -> FlowGraph:
    """Geometry-only graph from a symmetric weight matrix (inf = no edge)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weight matrix must be square, got {w.shape}")
    if not np.array_equal(w, w.T):
        raise ValueError("weight matrix must be symmetric")
    empty = FlowField(np.zeros((1, 1)), np.zeros((1, 1)))
    edges = {}
    n = w.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if np.isfinite(w[i, j]):
                if w[i, j] < 0:
                    raise ValueError(f"negative weight at ({i}, {j})")
                edges[(i, j)] = FlowEdge(i, j, float(w[i, j]), 0.0, empty, empty, 0.0, 0.0)
    return FlowGraph(n, edges)


def flow_metric(graph: FlowGraph) -> np.ndarray:
    """All-pairs shortest-path distances over the consistency graph.

    Min-plus (Floyd-Warshall) passes repeat until nothing changes, so the
    result is a fixed point: d[i,k] <= d[i,j] + d[j,k] holds exactly for
    every triple, symmetry and the zero diagonal are preserved, and
    disconnected pairs stay +inf.
    """
    d = graph.weight_matrix()
    n = graph.n_nodes
    for _ in range(n + 1):
        changed = False
        for k in range(n):
            alt = d[:, k : k + 1] + d[k : k + 1, :]
            mask = alt < d
            if mask.any():
                changed = True
                d[mask] = alt[mask]
        if not changed:
            break
    return d


def ambient_metric(graph: FlowGraph) -> np.ndarray:
    """Shortest paths over the same edges, reweighted by pixel-space L2.

    This is the straight-line (double-exposure) geometry restricted to the
    consistency graph; comparing its embedding against the flow metric's
    shows how much the flow weights straighten the manifold.
    """
    if graph.images is None:
        raise ValueError("graph carries no images")
    w = np.full((graph.n_nodes, graph.n_nodes), np.inf)
    np.fill_diagonal(w, 0.0)
    for i, j in graph.edges:
        w[i, j] = w[j, i] = l2_distance(graph.images[i], graph.images[j])
    return flow_metric(graph_from_weights(w))


def geodesic_nodes(graph: FlowGraph, src: int, dst: int) -> list[int]:
    """Node sequence of a shortest path; ties prefer the lexicographically
    smallest sequence.  Raises when no path exists."""
    n = graph.n_nodes
    if not (0 <= src < n and 0 <= dst < n):
        raise ValueError(f"node out of range for {n}-node graph")
    if src == dst:
        return [src]
    adj: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    for (i, j), e in graph.edges.items():
        adj[i].append((j, e.weight))
        adj[j].append((i, e.weight))
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (src,))]
    done: set[int] = set()
    while heap:
        dist, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == dst:
            return list(path)
        for nxt, w in adj[node]:
            if nxt not in done:
                heapq.heappush(heap, (dist + w, path + (nxt,)))
    raise ValueError(f"nodes {src} and {dst} are not connected")


def flow_radius(graph: FlowGraph, i: int) -> float:
    """Largest single-hop distance from node i to a direct neighbor (0 if isolated)."""
    if not (0 <= i < graph.n_nodes):
        raise ValueError(f"node {i} out of range")
    weights = [e.weight for (a, b), e in graph.edges.items() if a == i or b == i]
    return max(weights) if weights else 0.0


def flow_curvature(graph: FlowGraph, i: int) -> float:
    """Reciprocal of the flow radius; +inf where the neighborhood is empty."""
    r = flow_radius(graph, i)
    return 1.0 / r if r > 0 else float("inf")
