"""
Leading-order gluing of single bumps to the small remainder solution.

Computes the Dirichlet values p_j at boundary vertices, the two Neumann
fluxes that must balance there, offsets of pulses on internal edges,
smallness audits of the expansion and the initial guess for Newton.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import RegimeError, SelectionError
from graph_grid import EdgeGrid, GraphFunction, GraphGrid
from metric_graph import HALFLINE, INTERNAL, PENDANT, EdgeSelection
from phase_plane import SPAN_MIN, shoot_bump, soliton

logger = logging.getLogger(__name__)

A_MAX = 2.0


def internal_offset(z_left: int, z_right: int) -> float:
    """Shift of a pulse on an internal edge towards its v_minus end.

    Args:
        z_left: Total degree of the v_minus vertex
        z_right: Total degree of the v_plus vertex

    Returns:
        float: a = ln[(Z_l - 2) Z_r / ((Z_r - 2) Z_l)] / 4 in scaled units
    """
    if z_left < 3 or z_right < 3:
        raise RegimeError(f"internal-edge vertices need degree >= 3, got {z_left} and {z_right}")
    return 0.25 * math.log((z_left - 2) * z_right / ((z_right - 2) * z_left))


def _log_source(selection: EdgeSelection, vertex: str, eps: float,
                offsets: Mapping[str, float]) -> List[float]:
    """Exponents of the exp(-eps l)-type terms feeding p_j, with multiplicity."""
    graph = selection.graph
    part = selection.partition(vertex)
    terms = []
    for edge_id in part.pendants:
        terms.append(-eps * graph.edge(edge_id).length)
    for edge_id in part.loops:
        terms.extend([-eps * graph.edge(edge_id).length] * 2)
    for edge_id in part.internal_minus:
        terms.append(-eps * graph.edge(edge_id).length - offsets[edge_id])
    for edge_id in part.internal_plus:
        terms.append(-eps * graph.edge(edge_id).length + offsets[edge_id])
    return terms


@dataclass
class AsymptoticData:
    eps: float
    p: Dict[str, float]
    q1: Dict[str, float]  # remainder side, D_j p_j
    q2: Dict[str, float]  # pulse side, from the exp(-eps l) expansion
    offsets: Dict[str, float]
    flagged_offsets: List[str] = field(default_factory=list)
    q2_shot: Optional[Dict[str, float]] = None  # pulse side from shot bumps

    def balance(self, vertex: str) -> float:
        """q1 + q2 at a vertex, using shot fluxes when available."""
        q2 = self.q2_shot if self.q2_shot is not None else self.q2
        return self.q1[vertex] + q2[vertex]

    def relative_balance(self, vertex: str) -> float:
        return abs(self.balance(vertex)) / self.p[vertex]

    @property
    def norm(self) -> float:
        return max(self.p.values())


def default_offsets(selection: EdgeSelection) -> Dict[str, float]:
    """Leading-order offsets of every selected internal edge."""
    offsets = {}
    for edge in selection.selected_edges():
        if edge.kind != INTERNAL:
            continue
        for vertex in edge.vertices:
            part = selection.partition(vertex)
            if part.M > 1:
                raise SelectionError(
                    f"vertex '{vertex}' meets more than one selected internal edge; "
                    "coupled offsets are not supported")
        left = selection.partition(edge.vertices[0]).Z
        right = selection.partition(edge.vertices[1]).Z
        offsets[edge.id] = internal_offset(left, right)
    return offsets


def _shot_flux(span: float, p: float) -> float:
    return shoot_bump(span, p).q


def dirichlet_data(selection: EdgeSelection, eps: float,
                   offsets: Optional[Mapping[str, float]] = None,
                   refine: bool = False) -> AsymptoticData:
    """Leading-order Dirichlet and Neumann data at every boundary vertex.

    Args:
        selection: Pulse edges on the unscaled graph
        eps: Scaling parameter
        offsets: Internal-edge offsets; computed from the vertex degrees if omitted
        refine: Re-evaluate the pulse-side flux with shot bumps and take one
            fixed-point step on p_j

    Returns:
        AsymptoticData: p, q1, q2 and offsets
    """
    if eps * selection.ell_N < SPAN_MIN:
        raise RegimeError(f"eps * ell_N = {eps * selection.ell_N:.4g} below {SPAN_MIN}")
    if offsets is None:
        offsets = default_offsets(selection)
    else:
        validate_offsets(selection, offsets)
    offsets = dict(offsets)
    flagged = [edge_id for edge_id, a in offsets.items() if abs(a) > A_MAX]
    for edge_id in flagged:
        logger.warning("Offset on '%s' is %.4g, beyond the a-priori bound %g",
                       edge_id, offsets[edge_id], A_MAX)

    p, q1, q2, sources_at = {}, {}, {}, {}
    for part in selection.partitions:
        terms = _log_source(selection, part.vertex, eps, offsets)
        sources = sources_at[part.vertex] = sum(math.exp(t) for t in terms)
        p_j = 4.0 * sources / part.Z
        p[part.vertex] = p_j
        q1[part.vertex] = part.D * p_j
        q2[part.vertex] = part.selected_ends * p_j - 4.0 * sources

    data = AsymptoticData(eps=eps, p=p, q1=q1, q2=q2, offsets=offsets, flagged_offsets=flagged)
    if refine:
        data.q2_shot = _shot_pulse_flux(selection, data)
        for part in selection.partitions:
            # one step on D p - sum(q_bump) = 0 with the leading-order slope Z
            p_new = p[part.vertex] - data.balance(part.vertex) / part.Z
            data.p[part.vertex] = p_new
            data.q1[part.vertex] = part.D * p_new
            data.q2[part.vertex] = part.selected_ends * p_new - 4.0 * sources_at[part.vertex]
        data.q2_shot = _shot_pulse_flux(selection, data)
    logger.debug("Dirichlet data at eps=%g: %s", eps, data.p)
    return data


def _bump_spans(selection: EdgeSelection, vertex: str, eps: float,
                offsets: Mapping[str, float]) -> List[float]:
    graph = selection.graph
    part = selection.partition(vertex)
    spans = [eps * graph.edge(e).length for e in part.pendants]
    spans += [eps * graph.edge(e).length for e in part.loops for _ in range(2)]
    spans += [eps * graph.edge(e).length + offsets[e] for e in part.internal_minus]
    spans += [eps * graph.edge(e).length - offsets[e] for e in part.internal_plus]
    return spans


def _shot_pulse_flux(selection: EdgeSelection, data: AsymptoticData) -> Dict[str, float]:
    flux = {}
    for part in selection.partitions:
        p_j = data.p[part.vertex]
        spans = _bump_spans(selection, part.vertex, data.eps, data.offsets)
        flux[part.vertex] = -sum(_shot_flux(span, p_j) for span in spans)
    return flux


@dataclass
class AuditEntry:
    name: str
    where: str
    ratio: float

    @property
    def passed(self) -> bool:
        return self.ratio < 1.0


@dataclass
class AuditReport:
    eps: float
    entries: List[AuditEntry] = field(default_factory=list)
    internal_applicable: bool = False
    error_terms: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def ratio(self, name: str, where: str) -> float:
        for entry in self.entries:
            if entry.name == name and entry.where == where:
                return entry.ratio
        raise KeyError((name, where))


def _exp_ratio(log_value: float) -> float:
    if log_value == -math.inf:
        return 0.0
    return math.exp(min(log_value, 700.0))


def audit_consistency(selection: EdgeSelection, eps: float,
                      data: AsymptoticData) -> AuditReport:
    """Smallness ratios that must stay below one for the expansion to hold.

    Ratios are evaluated in log space; an infinite ell_min gives ratio 0.
    """
    report = AuditReport(eps=eps)
    log_norm = math.log(data.norm)
    for part in selection.partitions:
        own = -eps * part.min_length
        report.entries.append(AuditEntry(
            "remainder", part.vertex, _exp_ratio(log_norm - eps * selection.ell_min - own)))
        report.entries.append(AuditEntry("cubic", part.vertex, _exp_ratio(3.0 * log_norm - own)))
        report.entries.append(AuditEntry(
            "bump", part.vertex, _exp_ratio(math.log(eps) - 3.0 * eps * part.min_length - own)))

    graph = selection.graph
    for edge in selection.selected_edges():
        if edge.kind != INTERNAL:
            continue
        report.internal_applicable = True
        base = -eps * edge.length
        report.entries.append(AuditEntry(
            "internal-remainder", edge.id, _exp_ratio(log_norm - eps * selection.ell_min - base)))
        report.entries.append(AuditEntry("internal-cubic", edge.id, _exp_ratio(3.0 * log_norm - base)))
        for vertex in edge.vertices:
            part = selection.partition(vertex)
            report.entries.append(AuditEntry(
                "internal-bump", f"{edge.id}@{vertex}",
                _exp_ratio(math.log(eps) - 3.0 * eps * part.min_length - base)))
            others = [graph.edge(e).length for e in part.pendants + part.loops]
            log_other = -eps * min(others) if others else -math.inf
            report.entries.append(AuditEntry(
                "internal-neighbour", f"{edge.id}@{vertex}", _exp_ratio(log_other - base)))
        report.error_terms[edge.id] = offset_error_estimate(selection, edge.id, eps,
                                                            data.offsets[edge.id])
    return report


def offset_error_estimate(selection: EdgeSelection, edge_id: str, eps: float,
                          offset: float) -> float:
    """First two explicit terms of the correction to the offset equation.

    Evaluated a-posteriori at the given offset, without iterating.
    """
    graph = selection.graph
    edge = graph.edge(edge_id)
    left = selection.partition(edge.vertices[0])
    right = selection.partition(edge.vertices[1])
    ell0 = eps * edge.length

    def neighbour_sum(part) -> float:
        total = sum(math.exp(-eps * graph.edge(e).length) for e in part.pendants)
        total += 2.0 * sum(math.exp(-eps * graph.edge(e).length) for e in part.loops)
        return total

    z_l, z_r = left.Z, right.Z
    first = 2.0 / (z_r - 2) * math.exp(3.0 * offset + ell0) * neighbour_sum(right)
    second = 2.0 * z_r / (z_l * (z_r - 2)) * math.exp(offset + ell0) * neighbour_sum(left)
    return abs(first - second)


def tail_solution(z: np.ndarray, kind: str, start: float, end: float = 0.0,
                  span: float = math.inf) -> np.ndarray:
    """Small-amplitude solution of -w'' + w = 0 with prescribed end values.

    Args:
        z: Offsets from the first anchor of the edge, in [0, span]
        kind: Edge kind; pendants take ``start`` at the vertex and a Neumann
            condition at their free end, half-lines decay from ``start``
        start: Value at z = 0 (the vertex end for pendants: z measured from it)
        end: Value at z = span for looping and internal edges
        span: Edge parameter length

    Returns:
        ndarray: Profile values, written with decaying exponentials only
    """
    z = np.asarray(z, dtype=float)
    if kind == HALFLINE:
        return start * np.exp(-z)
    if kind == PENDANT:
        # cosh(span - z) / cosh(span) with z measured from the vertex
        return start * np.exp(-z) * (1.0 + np.exp(-2.0 * (span - z))) / (1.0 + np.exp(-2.0 * span))
    denom = 1.0 - np.exp(-2.0 * span)
    left = start * np.exp(-z) * (1.0 - np.exp(-2.0 * (span - z))) / denom
    right = end * np.exp(-(span - z)) * (1.0 - np.exp(-2.0 * z)) / denom
    return left + right


def _vertex_values(grid: GraphGrid, selection: EdgeSelection,
                   data: AsymptoticData) -> Dict[str, float]:
    index = {v: i for i, v in enumerate(grid.graph.vertices)}
    table = grid.vertex_distances()
    values = {}
    for vertex in grid.graph.vertices:
        if vertex in data.p:
            values[vertex] = data.p[vertex]
        else:
            values[vertex] = sum(p * math.exp(-table[index[vertex], index[b]])
                                 for b, p in data.p.items())
    return values


def build_initial_guess(grid: GraphGrid, selection: EdgeSelection,
                        data: AsymptoticData) -> GraphFunction:
    """Sech bumps on selected edges glued to small tails on the remainder.

    Selected edges carry sech centred at the free end (pendant), the midpoint
    (looping) or the offset (internal), corrected so that the value at each
    vertex equals p_j exactly. Scaled grids only.
    """
    if not grid.scaled:
        raise RegimeError("initial guess is built on scaled grids")
    vertex_values = _vertex_values(grid, selection, data)

    def profile(eg: EdgeGrid) -> np.ndarray:
        edge, z = eg.edge, eg.z
        ends = [vertex_values[a.vertex] for a in eg.anchors]
        if selection.is_selected(edge.id):
            if edge.kind == PENDANT:
                return soliton(z) + (ends[0] - soliton(z[-1]))
            centre = data.offsets.get(edge.id, 0.0) if edge.kind == INTERNAL else 0.0
            bump = soliton(z - centre)
            t = (z - z[0]) / (z[-1] - z[0])
            return bump + (1.0 - t) * (ends[0] - bump[0]) + t * (ends[1] - bump[-1])
        span = z[-1] - z[0]
        if edge.kind == PENDANT:
            return tail_solution(z[-1] - z, PENDANT, ends[0], span=span)
        if edge.kind == HALFLINE:
            return tail_solution(z, HALFLINE, ends[0])
        return tail_solution(z - z[0], edge.kind, ends[0], ends[1], span)

    return GraphFunction.from_profiles(grid, profile, vertex_values)


def pulse_seed(grid: GraphGrid, centres: Sequence[Tuple[str, float]]) -> GraphFunction:
    """Sum of sech pulses in graph distance from given points.

    Args:
        grid: Scaled grid
        centres: (edge id, coordinate) pairs in grid coordinates

    Returns:
        GraphFunction: Positive seed, continuous at every vertex
    """
    values = np.zeros(grid.n_nodes)
    for edge_id, coordinate in centres:
        values += soliton(grid.distance_from(edge_id, coordinate))
    return GraphFunction(grid, values)


def validate_offsets(selection: EdgeSelection, offsets: Mapping[str, float]) -> None:
    internal = {e.id for e in selection.selected_edges() if e.kind == INTERNAL}
    unknown = set(offsets) - internal
    if unknown:
        raise SelectionError(f"offsets given for non-internal or unselected edges: {sorted(unknown)}")
    missing = internal - set(offsets)
    if missing:
        raise SelectionError(f"missing offsets for internal edges: {sorted(missing)}")

