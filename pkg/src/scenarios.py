"""
Preset graphs with known edge-localized states.

Each preset builds its graph and selection from a handful of lengths and a
selection pattern, and records the Morse index the state is known to have
when there is one. Identical parameters always give identical graphs.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

from asymptotics import AsymptoticData, build_initial_guess, dirichlet_data, pulse_seed
from errors import RegimeError, ScenarioError, WorkbenchError
from graph_grid import GraphFunction, GraphGrid
from metric_graph import (HALFLINE, INTERNAL, LOOPING, PENDANT, Edge, EdgeSelection,
                          MetricGraph, build_selection, validate_graph)

logger = logging.getLogger(__name__)

DEFAULT_LADDER = (6.0, 8.0, 10.0, 12.0)


@dataclass(frozen=True)
class Scenario:
    """A preset graph, its pulse edges and what the state should look like.

    ``expected`` is the (n, z) pair of the linearization when it is known; z
    may be None when only the negative count is known. ``offset_rates`` give
    explicit internal-edge offsets as multiples of eps, and ``seeds`` replace
    the asymptotic guess by sech pulses at unscaled edge coordinates.
    """

    name: str
    pattern: str
    graph: MetricGraph
    selection: EdgeSelection
    expected: Optional[Tuple[int, Optional[int]]] = None
    eps_ladder: Tuple[float, ...] = DEFAULT_LADDER
    offset_rates: Tuple[Tuple[str, float], ...] = ()
    seeds: Tuple[Tuple[str, float], ...] = ()
    allow_fake_vertices: bool = False
    expect_localized: bool = True
    note: str = ""

    def offsets_at(self, eps: float) -> Optional[Dict[str, float]]:
        if not self.offset_rates:
            return None
        return {edge_id: eps * rate for edge_id, rate in self.offset_rates}

    def asymptotic_data(self, eps: float) -> AsymptoticData:
        return dirichlet_data(self.selection, eps, self.offsets_at(eps))

    def initial_guess(self, grid: GraphGrid) -> GraphFunction:
        """Starting point for Newton on a scaled grid of this scenario's graph."""
        if self.seeds:
            if not grid.scaled:
                raise RegimeError("pulse seeds are placed on scaled grids")
            return pulse_seed(grid, [(edge_id, grid.stretch * c) for edge_id, c in self.seeds])
        return build_initial_guess(grid, self.selection, self.asymptotic_data(grid.eps))


def _length(name: str, value) -> float:
    try:
        length = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{name} must be a number, got {value!r}")
    if not (length > 0 and math.isfinite(length)):
        raise ScenarioError(f"{name} must be positive and finite, got {value!r}")
    return length


def _count(name: str, value, minimum: int) -> int:
    try:
        count = int(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{name} must be an integer, got {value!r}")
    if count != float(value) or count < minimum:
        raise ScenarioError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return count


def _lengths(name: str, values, count: int) -> Tuple[float, ...]:
    if values is None:
        return (1.0,) * count
    if isinstance(values, (int, float, str)):
        values = [values]
    result = tuple(_length(name, v) for v in values)
    if len(result) != count:
        raise ScenarioError(f"{name} needs {count} values, got {len(result)}")
    return result


def _pattern(value: str, choices: Sequence[str]) -> str:
    if value not in choices:
        raise ScenarioError(f"unknown selection pattern '{value}', expected one of {', '.join(choices)}")
    return value


def _assemble(name: str, pattern: str, graph: MetricGraph, selected: Sequence[str],
              allow_fake_vertices: bool = False, **fields) -> Scenario:
    validate_graph(graph, allow_fake_vertices).raise_if_invalid()
    try:
        selection = build_selection(graph, selected)
    except WorkbenchError as e:
        raise ScenarioError(f"{name}: {e}")
    return Scenario(name=name, pattern=pattern, graph=graph, selection=selection,
                    allow_fake_vertices=allow_fake_vertices, **fields)


def flower(loops=3, lengths=None, pulses=None) -> Scenario:
    """Loops at one vertex plus a half-line; the first ``pulses`` loops carry a pulse."""
    loops = _count("loops", loops, 1)
    halves = _lengths("lengths", lengths, loops)
    pulses = loops if pulses is None else _count("pulses", pulses, 1)
    if pulses > loops:
        raise ScenarioError(f"pulses ({pulses}) exceeds the number of loops ({loops})")
    edges = [Edge(f"e{i + 1}", LOOPING, ("v",), halves[i]) for i in range(loops)]
    edges.append(Edge("h", HALFLINE, ("v",)))
    graph = MetricGraph(("v",), tuple(edges))
    return _assemble("flower", f"{pulses}-pulse", graph, [e.id for e in edges[:pulses]],
                     expected=(pulses, 0),
                     note="the Morse index of an N-pulse flower state is N")


DUMBBELL_PATTERNS = ("one-loop", "two-loops", "loop-internal", "all")


def dumbbell(ell_minus=1.0, ell_plus=1.0, ell_zero=0.5, selection="two-loops") -> Scenario:
    """Two loops joined by an internal edge.

    Only the loop selections carry a known Morse index; the loop+internal and
    all-edge states are reported without one.
    """
    ell_minus = _length("ell_minus", ell_minus)
    ell_plus = _length("ell_plus", ell_plus)
    ell_zero = _length("ell_zero", ell_zero)
    pattern = _pattern(selection, DUMBBELL_PATTERNS)
    graph = MetricGraph(("vm", "vp"), (
        Edge("em", LOOPING, ("vm",), ell_minus),
        Edge("e0", INTERNAL, ("vm", "vp"), ell_zero),
        Edge("ep", LOOPING, ("vp",), ell_plus),
    ))
    chosen = {
        "one-loop": (["em"], (1, 0)),
        "two-loops": (["em", "ep"], (2, 0)),
        "loop-internal": (["em", "e0"], None),
        "all": (["em", "e0", "ep"], None),
    }
    selected, expected = chosen[pattern]
    if "e0" in selected and not ell_zero < ell_minus:
        raise ScenarioError("the internal pulse needs ell_zero < ell_minus")
    return _assemble("dumbbell", pattern, graph, selected, expected=expected)


INTERVAL_PATTERNS = ("internal", "pendants", "mid-pulses")


def interval(ell1=1.0, ell2=0.6, ell3=1.0, selection="internal") -> Scenario:
    """A segment modeled as pendant(ell1) - internal(2 ell2) - pendant(ell3).

    The two junctions are fake vertices of degree 2, so this is the one preset
    that relaxes the degree check. The internal pulse sits eps (ell3 - ell1) / 2
    from the midpoint of the internal edge. The mid-pulse pattern seeds two
    sech pulses a quarter of the total length in from each end.
    """
    ell1, ell2, ell3 = (_length(n, v) for n, v in (("ell1", ell1), ("ell2", ell2), ("ell3", ell3)))
    pattern = _pattern(selection, INTERVAL_PATTERNS)
    graph = MetricGraph(("v1", "v2"), (
        Edge("e1", PENDANT, ("v1",), ell1),
        Edge("e2", INTERNAL, ("v1", "v2"), ell2),
        Edge("e3", PENDANT, ("v2",), ell3),
    ))
    if pattern == "internal":
        return _assemble("interval", pattern, graph, ["e2"], allow_fake_vertices=True,
                         expected=(2, 0), offset_rates=(("e2", 0.5 * (ell3 - ell1)),),
                         note="the single internal pulse has Morse index 2")
    if pattern == "pendants":
        return _assemble("interval", pattern, graph, ["e1", "e3"], allow_fake_vertices=True,
                         expected=(2, 0))
    quarter = 0.25 * (ell1 + 2.0 * ell2 + ell3)
    if not quarter < min(ell1, ell3):
        raise ScenarioError("mid-pulse seeds need (ell1 + 2 ell2 + ell3) / 4 below both pendant lengths")
    return _assemble("interval", pattern, graph, ["e1", "e3"], allow_fake_vertices=True,
                     expected=(4, None), seeds=(("e1", quarter), ("e3", quarter)),
                     expect_localized=False,
                     note="pulses away from the ends; not an edge-localized state")


def star(arms=3, lengths=None) -> Scenario:
    """Pendants and one half-line at a single vertex, every pendant carrying a pulse."""
    arms = _count("arms", arms, 2)
    sizes = _lengths("lengths", lengths, arms)
    edges = [Edge(f"p{i + 1}", PENDANT, ("v",), sizes[i]) for i in range(arms)]
    edges.append(Edge("h", HALFLINE, ("v",)))
    graph = MetricGraph(("v",), tuple(edges))
    return _assemble("star", f"{arms}-pulse", graph, [e.id for e in edges[:arms]],
                     expected=(arms, 0))


def bridge(ell_zero=0.5, left=2, right=3) -> Scenario:
    """One internal edge whose ends carry ``left`` and ``right`` half-lines."""
    ell_zero = _length("ell_zero", ell_zero)
    left = _count("left", left, 2)
    right = _count("right", right, 2)
    edges = [Edge("e0", INTERNAL, ("vl", "vr"), ell_zero)]
    edges += [Edge(f"hl{i + 1}", HALFLINE, ("vl",)) for i in range(left)]
    edges += [Edge(f"hr{i + 1}", HALFLINE, ("vr",)) for i in range(right)]
    graph = MetricGraph(("vl", "vr"), tuple(edges))
    return _assemble("bridge", f"{left}-{right}", graph, ["e0"])


PRESETS: Dict[str, Callable[..., Scenario]] = {
    "flower": flower,
    "dumbbell": dumbbell,
    "interval": interval,
    "star": star,
    "bridge": bridge,
}


def scenario(name: str, **params) -> Scenario:
    """Build a preset by name.

    Raises:
        ScenarioError: Unknown preset, unknown parameter or invalid value
    """
    builder = PRESETS.get(name)
    if builder is None:
        raise ScenarioError(f"unknown scenario '{name}', expected one of {', '.join(PRESETS)}")
    try:
        result = builder(**params)
    except TypeError as e:
        raise ScenarioError(f"{name}: {e}")
    logger.debug("Scenario %s/%s: %d edges, selected %s",
                 result.name, result.pattern, len(result.graph.edges), result.selection.selected)
    return result
