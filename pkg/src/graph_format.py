"""
Line-oriented text format for metric graphs.

    vertex <id>
    pendant <id> <vertex> length=<l>
    loop <id> <vertex> halflength=<l>
    internal <id> <v-> <v+> halflength=<l>
    halfline <id> <vertex>
    select <id> [<id> ...]

'#' starts a comment. Vertices must be declared before edges use them.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from errors import GraphFormatError
from metric_graph import HALFLINE, INTERNAL, LOOPING, PENDANT, Edge, MetricGraph

logger = logging.getLogger(__name__)

# keyword -> (kind, number of vertex ids, name of the length key)
_EDGE_SYNTAX = {
    "pendant": (PENDANT, 1, "length"),
    "loop": (LOOPING, 1, "halflength"),
    "internal": (INTERNAL, 2, "halflength"),
    "halfline": (HALFLINE, 1, None),
}
_KEYWORD_BY_KIND = {kind: keyword for keyword, (kind, _, _) in _EDGE_SYNTAX.items()}


def _parse_length(token: str, key: str, line_no: int) -> float:
    name, sep, value = token.partition("=")
    if not sep or name != key:
        raise GraphFormatError(f"expected '{key}=<value>', got '{token}'", line_no)
    try:
        length = float(value)
    except ValueError:
        raise GraphFormatError(f"'{value}' is not a decimal length", line_no) from None
    if not (math.isfinite(length) and length > 0):
        raise GraphFormatError(f"length must be positive and finite, got {value}", line_no)
    return length


def parse_graph(text: str) -> Tuple[MetricGraph, Optional[List[str]]]:
    """Parse graph text.

    Args:
        text: File contents

    Returns:
        tuple: (graph, selected edge ids or None when no select line is present)

    Raises:
        GraphFormatError: With the offending line number
    """
    vertices: List[str] = []
    edges: List[Edge] = []
    edge_ids: Dict[str, int] = {}
    selection: Optional[List[str]] = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword, args = tokens[0], tokens[1:]

        if keyword == "vertex":
            if len(args) != 1:
                raise GraphFormatError("usage: vertex <id>", line_no)
            if args[0] in vertices:
                raise GraphFormatError(f"vertex '{args[0]}' declared twice", line_no)
            vertices.append(args[0])

        elif keyword in _EDGE_SYNTAX:
            kind, n_vertices, length_key = _EDGE_SYNTAX[keyword]
            expected = 1 + n_vertices + (1 if length_key else 0)
            if len(args) != expected:
                raise GraphFormatError(
                    f"'{keyword}' takes {expected} argument(s), got {len(args)}", line_no)
            edge_id = args[0]
            if edge_id in edge_ids:
                raise GraphFormatError(
                    f"edge '{edge_id}' already declared on line {edge_ids[edge_id]}", line_no)
            incident = tuple(args[1:1 + n_vertices])
            for vertex in incident:
                if vertex not in vertices:
                    raise GraphFormatError(f"undeclared vertex '{vertex}'", line_no)
            length = _parse_length(args[-1], length_key, line_no) if length_key else math.inf
            edges.append(Edge(edge_id, kind, incident, length))
            edge_ids[edge_id] = line_no

        elif keyword == "select":
            if not args:
                raise GraphFormatError("'select' needs at least one edge id", line_no)
            if selection is not None:
                raise GraphFormatError("only one 'select' line is allowed", line_no)
            for edge_id in args:
                if edge_id not in edge_ids:
                    raise GraphFormatError(f"selected edge '{edge_id}' is not declared", line_no)
            selection = list(args)

        else:
            raise GraphFormatError(f"unknown declaration '{keyword}'", line_no)

    logger.debug("Parsed graph with %d vertices and %d edges", len(vertices), len(edges))
    return MetricGraph(tuple(vertices), tuple(edges)), selection


def load_graph(path: Union[str, Path]) -> Tuple[MetricGraph, Optional[List[str]]]:
    """Read and parse a graph file (UTF-8)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise GraphFormatError(f"cannot read graph file {path}: {e}") from e
    return parse_graph(text)


def format_graph(graph: MetricGraph, selected: Optional[Sequence[str]] = None) -> str:
    """Render a graph in the text format accepted by parse_graph."""
    lines = [f"vertex {vertex}" for vertex in graph.vertices]
    for edge in graph.edges:
        keyword = _KEYWORD_BY_KIND[edge.kind]
        parts = [keyword, edge.id, *edge.vertices]
        if edge.kind == PENDANT:
            parts.append(f"length={edge.length!r}")
        elif edge.bounded:
            parts.append(f"halflength={edge.length!r}")
        lines.append(" ".join(parts))
    if selected:
        lines.append("select " + " ".join(selected))
    return "\n".join(lines) + "\n"
