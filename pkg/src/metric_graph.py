"""
Metric graph model with Neumann-Kirchhoff vertices.

Holds the typed edge records, structural validation, epsilon-scaling and the
edge-selection bookkeeping (boundary vertices, degree counts and the length
constraints on the chosen pulse edges).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

from errors import AssumptionError, GraphValidationError, SelectionError

logger = logging.getLogger(__name__)

PENDANT = "pendant"
LOOPING = "looping"
INTERNAL = "internal"
HALFLINE = "halfline"

EDGE_KINDS = (PENDANT, LOOPING, INTERNAL, HALFLINE)
BOUNDED_KINDS = (PENDANT, LOOPING, INTERNAL)


@dataclass(frozen=True)
class Edge:
    """One edge of a metric graph.

    ``length`` is the pendant length, the half-length of looping and internal
    edges, and ``inf`` for half-lines. ``vertices`` holds one id for pendant,
    looping and half-line edges and ``(v_minus, v_plus)`` for internal edges.
    """

    id: str
    kind: str
    vertices: Tuple[str, ...]
    length: float = math.inf

    @property
    def bounded(self) -> bool:
        return self.kind != HALFLINE

    @property
    def span(self) -> float:
        """Full parameter length of the edge."""
        if self.kind in (LOOPING, INTERNAL):
            return 2.0 * self.length
        return self.length

    def ends(self) -> List[str]:
        """Vertex ids met by the edge ends, looping edges listed twice."""
        if self.kind == LOOPING:
            return [self.vertices[0], self.vertices[0]]
        return list(self.vertices)

    def scaled(self, factor: float) -> "Edge":
        if not self.bounded:
            return self
        return Edge(self.id, self.kind, self.vertices, self.length * factor)


@dataclass(frozen=True)
class MetricGraph:
    vertices: Tuple[str, ...]
    edges: Tuple[Edge, ...]

    def edge(self, edge_id: str) -> Edge:
        for edge in self.edges:
            if edge.id == edge_id:
                return edge
        raise KeyError(edge_id)

    def has_edge(self, edge_id: str) -> bool:
        return any(edge.id == edge_id for edge in self.edges)

    def edge_ends_at(self, vertex: str) -> List[Edge]:
        """Edges incident to a vertex, one entry per edge end."""
        result = []
        for edge in self.edges:
            result.extend(edge for v in edge.ends() if v == vertex)
        return result

    def degree(self, vertex: str) -> int:
        return len(self.edge_ends_at(vertex))

    def bounded_edges(self) -> List[Edge]:
        return [edge for edge in self.edges if edge.bounded]


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if self.violations:
            raise GraphValidationError("; ".join(self.violations))


def validate_graph(graph: MetricGraph, allow_fake_vertices: bool = False) -> ValidationReport:
    """Check every structural invariant of a metric graph.

    Args:
        graph: Graph to check
        allow_fake_vertices: Accept degree-2 vertices (single-interval graphs)

    Returns:
        ValidationReport: Empty iff the graph is valid
    """
    report = ValidationReport()
    known = set()
    for vertex in graph.vertices:
        if vertex in known:
            report.violations.append(f"duplicate vertex '{vertex}'")
        known.add(vertex)

    seen_edges = set()
    for edge in graph.edges:
        if edge.id in seen_edges:
            report.violations.append(f"duplicate edge '{edge.id}'")
        seen_edges.add(edge.id)

        if edge.kind not in EDGE_KINDS:
            report.violations.append(f"edge '{edge.id}' has unknown kind '{edge.kind}'")
            continue

        expected = 2 if edge.kind == INTERNAL else 1
        if len(edge.vertices) != expected:
            report.violations.append(
                f"edge '{edge.id}' ({edge.kind}) needs {expected} incident vertex id(s), "
                f"got {len(edge.vertices)}")
            continue

        for vertex in edge.vertices:
            if vertex not in known:
                report.violations.append(f"edge '{edge.id}' references unknown vertex '{vertex}'")

        if edge.kind == INTERNAL and edge.vertices[0] == edge.vertices[1]:
            report.violations.append(
                f"internal edge '{edge.id}' must join two distinct vertices")

        if edge.bounded:
            if not (math.isfinite(edge.length) and edge.length > 0):
                report.violations.append(
                    f"edge '{edge.id}' must have a positive finite length, got {edge.length}")

    min_degree = 2 if allow_fake_vertices else 3
    for vertex in graph.vertices:
        degree = graph.degree(vertex)
        if degree == 0:
            report.violations.append(f"vertex '{vertex}' is isolated")
        elif degree < min_degree:
            report.violations.append(
                f"vertex '{vertex}' has degree {degree} < {min_degree}")

    if report.violations:
        logger.debug("Graph validation found %d violation(s)", len(report.violations))
    return report


def scale_graph(graph: MetricGraph, eps: float) -> MetricGraph:
    """Multiply every bounded length by eps; half-lines and topology unchanged."""
    if not eps > 0:
        raise ValueError(f"Scaling parameter must be positive, got {eps}")
    return MetricGraph(graph.vertices, tuple(edge.scaled(eps) for edge in graph.edges))


@dataclass(frozen=True)
class VertexPartition:
    """Edge-end bookkeeping at one boundary vertex."""

    vertex: str
    pendants: Tuple[str, ...]
    loops: Tuple[str, ...]
    internal_minus: Tuple[str, ...]  # selected internal edges whose v_minus end is here
    internal_plus: Tuple[str, ...]
    remainder_degree: int  # D_j
    min_length: float  # ell_{j,min}

    @property
    def K(self) -> int:
        return len(self.pendants)

    @property
    def L(self) -> int:
        return len(self.loops)

    @property
    def M(self) -> int:
        return len(self.internal_minus) + len(self.internal_plus)

    @property
    def D(self) -> int:
        return self.remainder_degree

    @property
    def Z(self) -> int:
        return self.D + self.K + 2 * self.L + self.M

    @property
    def selected_ends(self) -> int:
        return self.K + 2 * self.L + self.M


@dataclass(frozen=True)
class EdgeSelection:
    graph: MetricGraph
    selected: Tuple[str, ...]
    partitions: Tuple[VertexPartition, ...]
    ell_min: float

    @property
    def boundary_vertices(self) -> Tuple[str, ...]:
        return tuple(part.vertex for part in self.partitions)

    @property
    def ell_N(self) -> float:
        return min(part.min_length for part in self.partitions)

    @property
    def N(self) -> int:
        return len(self.selected)

    def partition(self, vertex: str) -> VertexPartition:
        for part in self.partitions:
            if part.vertex == vertex:
                return part
        raise KeyError(vertex)

    def is_selected(self, edge_id: str) -> bool:
        return edge_id in self.selected

    def remainder_edges(self) -> List[Edge]:
        return [edge for edge in self.graph.edges if edge.id not in self.selected]

    def selected_edges(self) -> List[Edge]:
        return [self.graph.edge(edge_id) for edge_id in self.selected]


def build_selection(graph: MetricGraph, ids: Iterable[str]) -> EdgeSelection:
    """Derive boundary vertices, degree counts and lengths for a pulse set.

    Args:
        graph: The unscaled graph
        ids: Ids of the bounded edges carrying one pulse each

    Returns:
        EdgeSelection: Fully populated selection

    Raises:
        SelectionError: Empty selection, unknown id or half-line in selection
    """
    chosen = set(ids)
    if not chosen:
        raise SelectionError("Edge selection is empty")
    for edge_id in sorted(chosen):
        if not graph.has_edge(edge_id):
            raise SelectionError(f"Unknown edge '{edge_id}' in selection")
        if not graph.edge(edge_id).bounded:
            raise SelectionError(f"Half-line '{edge_id}' cannot carry a pulse")

    # graph order keeps the result independent of the id ordering
    selected = tuple(edge.id for edge in graph.edges if edge.id in chosen)

    partitions = []
    for vertex in graph.vertices:
        pendants: List[str] = []
        loops: List[str] = []
        minus: List[str] = []
        plus: List[str] = []
        remainder = 0
        for edge in graph.edges:
            ends = edge.ends()
            if vertex not in ends:
                continue
            if edge.id not in chosen:
                remainder += ends.count(vertex)
            elif edge.kind == PENDANT:
                pendants.append(edge.id)
            elif edge.kind == LOOPING:
                loops.append(edge.id)
            elif edge.vertices[0] == vertex:
                minus.append(edge.id)
            else:
                plus.append(edge.id)
        if not (pendants or loops or minus or plus):
            continue
        lengths = [graph.edge(e).length for e in pendants + loops + minus + plus]
        partitions.append(VertexPartition(
            vertex=vertex,
            pendants=tuple(pendants),
            loops=tuple(loops),
            internal_minus=tuple(minus),
            internal_plus=tuple(plus),
            remainder_degree=remainder,
            min_length=min(lengths)))

    remainder_spans = [edge.span for edge in graph.bounded_edges() if edge.id not in chosen]
    ell_min = min(remainder_spans) if remainder_spans else math.inf

    return EdgeSelection(graph, selected, tuple(partitions), ell_min)


@dataclass
class AssumptionReport:
    passed: bool
    margins: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    reasons: List[str] = field(default_factory=list)


def check_assumption_1(selection: EdgeSelection) -> AssumptionReport:
    """Evaluate the two length constraints at every boundary vertex.

    Margins are ``(ell_min + ell_N - ell_j, 3 ell_N - ell_j)``; both must be
    strictly positive for the check to pass.
    """
    ell_N = selection.ell_N
    report = AssumptionReport(passed=True)
    for part in selection.partitions:
        first = selection.ell_min + ell_N - part.min_length
        second = 3.0 * ell_N - part.min_length
        report.margins[part.vertex] = (first, second)
        if not first > 0:
            report.passed = False
            report.reasons.append(
                f"vertex '{part.vertex}': ell_min + ell_N <= ell_j,min (slack {first:.6g})")
        if not second > 0:
            report.passed = False
            report.reasons.append(
                f"vertex '{part.vertex}': 3 ell_N <= ell_j,min (slack {second:.6g})")
    return report


def check_assumption_2(selection: EdgeSelection) -> AssumptionReport:
    """Check isolation and strict minimality of selected internal edges."""
    graph = selection.graph
    report = AssumptionReport(passed=True)
    internal = [e for e in selection.selected_edges() if e.kind == INTERNAL]
    for edge in internal:
        for vertex in edge.vertices:
            part = selection.partition(vertex)
            others = [e for e in part.internal_minus + part.internal_plus if e != edge.id]
            if others:
                report.passed = False
                report.reasons.append(
                    f"internal edge '{edge.id}' shares vertex '{vertex}' with "
                    f"selected internal edge(s) {', '.join(others)}")
            competitors = [graph.edge(e).length for e in part.pendants + part.loops]
            if competitors and not edge.length < min(competitors):
                report.passed = False
                report.reasons.append(
                    f"internal edge '{edge.id}' half-length {edge.length:g} is not strictly "
                    f"below the selected pendant/looping lengths at '{vertex}'")
    return report


def selection_summary(selection: EdgeSelection) -> Dict[str, Dict[str, float]]:
    """Per-vertex counts as a plain dict, for CLI tables and logging."""
    return {
        part.vertex: {
            "D": part.D, "K": part.K, "L": part.L, "M": part.M, "Z": part.Z,
            "ell_j_min": part.min_length,
        }
        for part in selection.partitions
    }


def require_assumptions(selection: EdgeSelection, strict: bool = True) -> None:
    """Raise AssumptionError when either length assumption fails."""
    failures = check_assumption_1(selection).reasons + check_assumption_2(selection).reasons
    if failures and strict:
        raise AssumptionError("; ".join(failures))
    for reason in failures:
        logger.warning("Assumption check: %s", reason)
