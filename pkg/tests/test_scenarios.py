import unittest

from errors import RegimeError, ScenarioError
from graph_grid import build_grid
from metric_graph import HALFLINE, LOOPING, PENDANT, validate_graph
from scenarios import DEFAULT_LADDER, PRESETS, scenario


class TestScenarios(unittest.TestCase):

    # ------------------------------------------------------------------
    # Presets
    # ------------------------------------------------------------------

    def test_every_preset_builds_a_valid_graph(self) -> None:
        for name in PRESETS:
            sc = scenario(name)
            report = validate_graph(sc.graph, sc.allow_fake_vertices)
            self.assertTrue(report.valid, (name, report))
            self.assertEqual(sc.eps_ladder, DEFAULT_LADDER)

    def test_identical_parameters_identical_scenario(self) -> None:
        first = scenario("dumbbell", ell_minus=1.2, ell_zero=0.4, selection="loop-internal")
        second = scenario("dumbbell", ell_minus=1.2, ell_zero=0.4, selection="loop-internal")
        self.assertEqual(first.graph, second.graph)
        self.assertEqual(first.selection.selected, second.selection.selected)
        self.assertEqual(first.expected, second.expected)

    def test_flower(self) -> None:
        sc = scenario("flower", loops=4, pulses=2, lengths=[1, 1.5, 2, 2.5])
        self.assertEqual([e.kind for e in sc.graph.edges], [LOOPING] * 4 + [HALFLINE])
        self.assertEqual(sc.selection.selected, ("e1", "e2"))
        self.assertEqual(sc.expected, (2, 0))
        self.assertEqual(sc.pattern, "2-pulse")
        self.assertEqual(sc.graph.edge("e3").length, 2.0)

    def test_dumbbell_patterns(self) -> None:
        self.assertEqual(scenario("dumbbell", selection="one-loop").expected, (1, 0))
        self.assertEqual(scenario("dumbbell").expected, (2, 0))
        self.assertIsNone(scenario("dumbbell", selection="all").expected)
        self.assertEqual(scenario("dumbbell", selection="all").selection.selected, ("em", "e0", "ep"))

    def test_interval_patterns(self) -> None:
        internal = scenario("interval")
        self.assertTrue(internal.allow_fake_vertices)
        self.assertEqual(internal.offsets_at(8.0), {"e2": 0.0})
        pendants = scenario("interval", selection="pendants")
        self.assertEqual([e.kind for e in pendants.selection.selected_edges()], [PENDANT, PENDANT])
        self.assertIsNone(pendants.offsets_at(8.0))
        mid = scenario("interval", selection="mid-pulses")
        self.assertEqual(mid.expected, (4, None))
        self.assertFalse(mid.expect_localized)
        self.assertAlmostEqual(dict(mid.seeds)["e1"], 0.8)

    def test_star_and_bridge(self) -> None:
        star = scenario("star", arms=4)
        self.assertEqual(star.expected, (4, 0))
        self.assertEqual(len(star.graph.edges), 5)
        bridge = scenario("bridge", left=3, right=2)
        self.assertIsNone(bridge.expected)
        self.assertEqual(bridge.pattern, "3-2")
        self.assertEqual(bridge.selection.selected, ("e0",))

    def test_seeded_guess_needs_scaled_grid(self) -> None:
        sc = scenario("interval", selection="mid-pulses")
        with self.assertRaises(RegimeError):
            sc.initial_guess(build_grid(sc.graph, 8.0, scaled=False))

    # ------------------------------------------------------------------
    # Errors
    # ------------------------------------------------------------------

    def test_unknown_preset(self) -> None:
        with self.assertRaises(ScenarioError) as ctx:
            scenario("torus")
        self.assertIn("flower", str(ctx.exception))

    def test_unknown_parameter(self) -> None:
        with self.assertRaises(ScenarioError):
            scenario("flower", petals=3)

    def test_invalid_values(self) -> None:
        for name, params in (("flower", {"loops": 0}),
                             ("flower", {"loops": 2.5}),
                             ("flower", {"loops": 2, "pulses": 3}),
                             ("flower", {"lengths": [1.0]}),
                             ("dumbbell", {"ell_minus": "short"}),
                             ("dumbbell", {"ell_zero": -1}),
                             ("dumbbell", {"selection": "ring"}),
                             ("star", {"arms": 1}),
                             ("bridge", {"left": 1})):
            with self.assertRaises(ScenarioError, msg=(name, params)):
                scenario(name, **params)

    def test_internal_pulse_length_constraint(self) -> None:
        with self.assertRaises(ScenarioError):
            scenario("dumbbell", ell_zero=1.5, selection="loop-internal")
        scenario("dumbbell", ell_zero=1.5, selection="two-loops")

    def test_mid_pulse_quarter_constraint(self) -> None:
        with self.assertRaises(ScenarioError):
            scenario("interval", ell2=1.0, selection="mid-pulses")


if __name__ == "__main__":
    unittest.main()
