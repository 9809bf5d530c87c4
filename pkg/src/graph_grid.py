"""
Uniform per-edge grids on a metric graph and sampled functions on them.

Node layout: the nodes owned by each edge come first, in graph edge order
(a pendant owns its free terminal node), followed by one shared node per
vertex. Half-lines end in an implicit Dirichlet cap that is not an unknown.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from metric_graph import HALFLINE, INTERNAL, LOOPING, PENDANT, Edge, MetricGraph

logger = logging.getLogger(__name__)

DEFAULT_STEP = 0.02
DEFAULT_CUT = 15.0
MIN_INTERVALS = 4
CAP = -1


@dataclass(frozen=True)
class Anchor:
    """An edge end sitting on a vertex."""

    vertex: str
    coordinate: float
    position: int  # 0 for the first grid point, -1 for the last


@dataclass
class EdgeGrid:
    edge: Edge
    z: np.ndarray
    nodes: np.ndarray  # global node per grid point, CAP for the half-line cap
    step: float
    anchors: Tuple[Anchor, ...]

    @property
    def owned(self) -> np.ndarray:
        """Nodes that belong to this edge alone."""
        if self.edge.kind == PENDANT:
            return self.nodes[:-1]
        return self.nodes[1:-1]


@dataclass
class GraphGrid:
    graph: MetricGraph
    eps: float
    stretch: float  # multiplies unscaled lengths into grid coordinates
    kappa2: float  # coefficient of U in -U'' + kappa2 U - 2 U^3
    z_cut: float
    edges: Dict[str, EdgeGrid]
    vertex_nodes: Dict[str, int]
    n_nodes: int
    weights: np.ndarray

    @property
    def scaled(self) -> bool:
        return self.stretch == self.eps and self.kappa2 == 1.0

    @property
    def max_step(self) -> float:
        return max(eg.step for eg in self.edges.values())

    def edge_grid(self, edge_id: str) -> EdgeGrid:
        return self.edges[edge_id]

    def vertex_distances(self) -> np.ndarray:
        """Shortest-path distances between vertices in grid coordinates."""
        index = {v: i for i, v in enumerate(self.graph.vertices)}
        n = len(index)
        weights = np.full((n, n), np.inf)
        for eg in self.edges.values():
            if eg.edge.kind == INTERNAL:
                i, j = index[eg.edge.vertices[0]], index[eg.edge.vertices[1]]
                span = eg.z[-1] - eg.z[0]
                weights[i, j] = weights[j, i] = min(weights[i, j], span)
        rows, cols = np.nonzero(np.isfinite(weights))
        matrix = csr_matrix((weights[rows, cols], (rows, cols)), shape=(n, n))
        return dijkstra(matrix, directed=False)

    def distance_from(self, edge_id: str, coordinate: float) -> np.ndarray:
        """Graph distance from a point on an edge to every node."""
        index = {v: i for i, v in enumerate(self.graph.vertices)}
        table = self.vertex_distances()
        source = self.edges[edge_id]
        to_vertex = np.full(len(index), np.inf)
        for anchor in source.anchors:
            leg = abs(coordinate - anchor.coordinate)
            to_vertex = np.minimum(to_vertex, leg + table[index[anchor.vertex]])

        result = np.empty(self.n_nodes)
        for vertex, node in self.vertex_nodes.items():
            result[node] = to_vertex[index[vertex]]
        for eg in self.edges.values():
            owned = eg.owned
            z = eg.z[_owned_slice(eg)]
            best = np.full(len(owned), np.inf)
            for anchor in eg.anchors:
                best = np.minimum(best, to_vertex[index[anchor.vertex]] + np.abs(z - anchor.coordinate))
            if eg.edge.id == edge_id:
                best = np.minimum(best, np.abs(z - coordinate))
            result[owned] = best
        return result


def _owned_slice(eg: EdgeGrid) -> slice:
    return slice(0, -1) if eg.edge.kind == PENDANT else slice(1, -1)


def _intervals(span: float, step: float) -> int:
    return max(MIN_INTERVALS, int(math.ceil(span / step - 1e-9)))


def build_grid(graph: MetricGraph, eps: float, h: Optional[float] = None,
               z_cut: Optional[float] = None, scaled: bool = True) -> GraphGrid:
    """Discretize a graph for the stationary problem at scaling eps.

    Args:
        graph: Unscaled graph
        eps: Scaling parameter (the large-mass parameter sqrt(-omega))
        h: Grid step in scaled units (default min(0.02, shortest scaled edge / 50))
        z_cut: Half-line truncation in scaled units
        scaled: Grid the scaled equation (kappa2 = 1) or the unscaled one
            on the original lengths with kappa2 = eps^2

    Returns:
        GraphGrid: Node layout, steps and trapezoid weights
    """
    if not eps > 0:
        raise ValueError(f"Scaling parameter must be positive, got {eps}")
    bounded = graph.bounded_edges()
    if h is None:
        shortest = min((eps * e.span for e in bounded), default=DEFAULT_CUT)
        h = min(DEFAULT_STEP, shortest / 50.0)
    if z_cut is None:
        longest = max((eps * e.length for e in bounded), default=0.0)
        z_cut = max(DEFAULT_CUT, 3.0 * longest)
    if not (h > 0 and z_cut > 0):
        raise ValueError(f"Grid step and cut-off must be positive, got h={h}, z_cut={z_cut}")

    stretch, kappa2 = eps, 1.0
    if not scaled:
        stretch, kappa2 = 1.0, eps * eps
        h, z_cut = h / eps, z_cut / eps

    layouts: List[Tuple[Edge, np.ndarray, float, int]] = []
    next_node = 0
    for edge in graph.edges:
        span = z_cut if edge.kind == HALFLINE else stretch * edge.span
        n = _intervals(span, h)
        start = -0.5 * span if edge.kind in (LOOPING, INTERNAL) else 0.0
        z = start + (span / n) * np.arange(n + 1)
        owned = n if edge.kind == PENDANT else n - 1
        layouts.append((edge, z, span / n, next_node))
        next_node += owned

    vertex_nodes = {v: next_node + i for i, v in enumerate(graph.vertices)}
    n_nodes = next_node + len(graph.vertices)

    edges: Dict[str, EdgeGrid] = {}
    weights = np.zeros(n_nodes)
    for edge, z, step, first in layouts:
        n = len(z) - 1
        if edge.kind == PENDANT:
            nodes = np.append(np.arange(first, first + n), vertex_nodes[edge.vertices[0]])
            anchors = (Anchor(edge.vertices[0], z[-1], -1),)
        elif edge.kind == HALFLINE:
            inner = np.arange(first, first + n - 1)
            nodes = np.concatenate([[vertex_nodes[edge.vertices[0]]], inner, [CAP]])
            anchors = (Anchor(edge.vertices[0], z[0], 0),)
        else:
            v_start = vertex_nodes[edge.vertices[0]]
            v_end = vertex_nodes[edge.vertices[-1]]
            inner = np.arange(first, first + n - 1)
            nodes = np.concatenate([[v_start], inner, [v_end]])
            anchors = (Anchor(edge.vertices[0], z[0], 0), Anchor(edge.vertices[-1], z[-1], -1))
        nodes = nodes.astype(int)

        local = np.full(n + 1, step)
        local[0] = local[-1] = 0.5 * step
        live = nodes != CAP
        np.add.at(weights, nodes[live], local[live])
        edges[edge.id] = EdgeGrid(edge, z, nodes, step, anchors)

    logger.debug("Grid at eps=%g: %d nodes, h=%.4g, z_cut=%.4g", eps, n_nodes, h, z_cut)
    return GraphGrid(graph=graph, eps=eps, stretch=stretch, kappa2=kappa2, z_cut=z_cut,
                     edges=edges, vertex_nodes=vertex_nodes, n_nodes=n_nodes, weights=weights)


@dataclass
class GraphFunction:
    """Real field sampled on a GraphGrid, one value per node."""

    grid: GraphGrid
    values: np.ndarray

    @property
    def eps(self) -> float:
        return self.grid.eps

    @classmethod
    def zeros(cls, grid: GraphGrid) -> "GraphFunction":
        return cls(grid, np.zeros(grid.n_nodes))

    @classmethod
    def from_profiles(cls, grid: GraphGrid,
                      profile: Callable[[EdgeGrid], np.ndarray],
                      vertex_values: Dict[str, float]) -> "GraphFunction":
        """Fill owned nodes from per-edge profiles and vertices from a table.

        ``profile`` gets an EdgeGrid and returns values at all its grid points;
        only the owned entries are kept.
        """
        values = np.zeros(grid.n_nodes)
        for eg in grid.edges.values():
            values[eg.owned] = np.asarray(profile(eg))[_owned_slice(eg)]
        for vertex, node in grid.vertex_nodes.items():
            values[node] = vertex_values[vertex]
        return cls(grid, values)

    def with_values(self, values: np.ndarray) -> "GraphFunction":
        return GraphFunction(self.grid, np.asarray(values, dtype=float))

    def extended(self) -> np.ndarray:
        """Values with a trailing zero so that CAP indexes the half-line cap."""
        return np.append(self.values, 0.0)

    def on_edge(self, edge_id: str) -> Tuple[np.ndarray, np.ndarray]:
        """(z, values) along an edge, vertex ends and cap included."""
        eg = self.grid.edges[edge_id]
        return eg.z, self.extended()[eg.nodes]

    def at_vertex(self, vertex: str) -> float:
        return float(self.values[self.grid.vertex_nodes[vertex]])

    def l2_squared(self, edge_ids) -> float:
        """Sum of trapezoid integrals of U^2 over the given edges."""
        total = 0.0
        for edge_id in edge_ids:
            z, w = self.on_edge(edge_id)
            total += float(trapezoid(w * w, z))
        return total
