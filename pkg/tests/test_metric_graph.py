import math
import unittest

from errors import AssumptionError, GraphValidationError, SelectionError
from metric_graph import (HALFLINE, INTERNAL, LOOPING, PENDANT, Edge, MetricGraph,
                          build_selection, check_assumption_1, check_assumption_2,
                          require_assumptions, scale_graph, selection_summary, validate_graph)


def flower(lengths=(1.0, 1.0, 1.0)) -> MetricGraph:
    edges = [Edge(f"e{i + 1}", LOOPING, ("v",), l) for i, l in enumerate(lengths)]
    edges.append(Edge("h", HALFLINE, ("v",)))
    return MetricGraph(("v",), tuple(edges))


def dumbbell(ell_zero=0.5) -> MetricGraph:
    return MetricGraph(("vm", "vp"), (
        Edge("em", LOOPING, ("vm",), 1.0),
        Edge("e0", INTERNAL, ("vm", "vp"), ell_zero),
        Edge("ep", LOOPING, ("vp",), 1.0),
    ))


class TestMetricGraph(unittest.TestCase):

    # ------------------------------------------------------------------
    # Edge and graph records
    # ------------------------------------------------------------------

    def test_loop_ends_listed_twice(self) -> None:
        edge = Edge("e", LOOPING, ("v",), 1.0)
        self.assertEqual(edge.ends(), ["v", "v"])
        self.assertEqual(edge.span, 2.0)

    def test_pendant_span_is_length(self) -> None:
        self.assertEqual(Edge("p", PENDANT, ("v",), 1.5).span, 1.5)

    def test_degree_counts_loop_twice(self) -> None:
        self.assertEqual(flower().degree("v"), 7)

    def test_halfline_unbounded(self) -> None:
        edge = Edge("h", HALFLINE, ("v",))
        self.assertFalse(edge.bounded)
        self.assertTrue(math.isinf(edge.length))

    # ------------------------------------------------------------------
    # validate_graph
    # ------------------------------------------------------------------

    def test_flower_valid(self) -> None:
        self.assertTrue(validate_graph(flower()).valid)

    def test_degree_two_vertex_rejected(self) -> None:
        graph = MetricGraph(("v1", "v2"), (
            Edge("e1", PENDANT, ("v1",), 1.0),
            Edge("e2", INTERNAL, ("v1", "v2"), 0.6),
            Edge("e3", PENDANT, ("v2",), 1.0),
        ))
        report = validate_graph(graph)
        self.assertFalse(report.valid)
        self.assertTrue(any("degree 2" in v for v in report.violations))
        self.assertTrue(validate_graph(graph, allow_fake_vertices=True).valid)

    def test_unknown_vertex(self) -> None:
        graph = MetricGraph(("v",), (Edge("e", LOOPING, ("w",), 1.0), Edge("h", HALFLINE, ("v",))))
        report = validate_graph(graph)
        self.assertTrue(any("unknown vertex 'w'" in v for v in report.violations))

    def test_nonpositive_length(self) -> None:
        graph = flower((1.0, 0.0, 1.0))
        report = validate_graph(graph)
        self.assertTrue(any("positive finite length" in v for v in report.violations))

    def test_duplicate_edge(self) -> None:
        graph = MetricGraph(("v",), (Edge("e", LOOPING, ("v",), 1.0), Edge("e", HALFLINE, ("v",))))
        self.assertTrue(any("duplicate edge" in v for v in validate_graph(graph).violations))

    def test_internal_self_edge(self) -> None:
        graph = MetricGraph(("v",), (Edge("e", INTERNAL, ("v", "v"), 1.0), Edge("h", HALFLINE, ("v",))))
        self.assertTrue(any("distinct" in v for v in validate_graph(graph).violations))

    def test_raise_if_invalid(self) -> None:
        with self.assertRaises(GraphValidationError):
            validate_graph(flower((1.0, -1.0, 1.0))).raise_if_invalid()

    # ------------------------------------------------------------------
    # scale_graph
    # ------------------------------------------------------------------

    def test_scale_graph(self) -> None:
        scaled = scale_graph(flower((1.0, 2.0, 3.0)), 4.0)
        self.assertEqual([e.length for e in scaled.bounded_edges()], [4.0, 8.0, 12.0])
        self.assertTrue(math.isinf(scaled.edge("h").length))
        self.assertEqual(scaled.vertices, ("v",))

    def test_scale_graph_rejects_nonpositive(self) -> None:
        with self.assertRaises(ValueError):
            scale_graph(flower(), 0.0)

    # ------------------------------------------------------------------
    # build_selection
    # ------------------------------------------------------------------

    def test_flower_selection_counts(self) -> None:
        selection = build_selection(flower(), ["e1", "e2"])
        part = selection.partition("v")
        self.assertEqual((part.K, part.L, part.M, part.D, part.Z), (0, 2, 0, 3, 7))
        self.assertEqual(selection.boundary_vertices, ("v",))
        self.assertEqual(selection.ell_N, 1.0)
        self.assertEqual(selection.ell_min, 2.0)

    def test_selection_in_graph_order(self) -> None:
        selection = build_selection(flower(), ["e3", "e1"])
        self.assertEqual(selection.selected, ("e1", "e3"))

    def test_selection_errors(self) -> None:
        with self.assertRaises(SelectionError):
            build_selection(flower(), [])
        with self.assertRaises(SelectionError):
            build_selection(flower(), ["nope"])
        with self.assertRaises(SelectionError):
            build_selection(flower(), ["h"])

    def test_internal_selection_sides(self) -> None:
        selection = build_selection(dumbbell(), ["em", "e0"])
        left, right = selection.partition("vm"), selection.partition("vp")
        self.assertEqual(left.internal_minus, ("e0",))
        self.assertEqual(right.internal_plus, ("e0",))
        self.assertEqual((left.D, left.Z), (0, 3))
        self.assertEqual((right.D, right.Z), (2, 3))

    def test_selection_summary(self) -> None:
        summary = selection_summary(build_selection(dumbbell(), ["em"]))
        self.assertEqual(summary["vm"]["Z"], 3)
        self.assertEqual(summary["vm"]["D"], 1)
        self.assertNotIn("vp", summary)

    # ------------------------------------------------------------------
    # Length assumptions
    # ------------------------------------------------------------------

    def test_assumption_1_margins(self) -> None:
        report = check_assumption_1(build_selection(flower(), ["e1"]))
        self.assertTrue(report.passed)
        first, second = report.margins["v"]
        self.assertAlmostEqual(first, 2.0)
        self.assertAlmostEqual(second, 2.0)

    def test_assumption_2_internal_not_shortest(self) -> None:
        report = check_assumption_2(build_selection(dumbbell(ell_zero=1.5), ["em", "e0"]))
        self.assertFalse(report.passed)
        self.assertTrue(any("strictly" in r for r in report.reasons))

    def test_assumption_2_passes(self) -> None:
        self.assertTrue(check_assumption_2(build_selection(dumbbell(), ["em", "e0"])).passed)

    def test_require_assumptions(self) -> None:
        selection = build_selection(dumbbell(ell_zero=1.5), ["em", "e0"])
        with self.assertRaises(AssumptionError):
            require_assumptions(selection)
        require_assumptions(selection, strict=False)


if __name__ == "__main__":
    unittest.main()
