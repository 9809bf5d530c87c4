import math
import unittest

import numpy as np

from asymptotics import (A_MAX, audit_consistency, build_initial_guess, default_offsets,
                         dirichlet_data, internal_offset, tail_solution)
from errors import RegimeError, SelectionError
from graph_grid import build_grid
from metric_graph import HALFLINE, LOOPING, PENDANT
from scenarios import scenario


class TestAsymptotics(unittest.TestCase):

    # ------------------------------------------------------------------
    # internal_offset
    # ------------------------------------------------------------------

    def test_offset_symmetric(self) -> None:
        self.assertEqual(internal_offset(3, 3), 0.0)
        self.assertEqual(internal_offset(5, 5), 0.0)

    def test_offset_three_four(self) -> None:
        self.assertAlmostEqual(internal_offset(3, 4), math.log(2.0 / 3.0) / 4.0, places=15)
        self.assertAlmostEqual(internal_offset(4, 3), -internal_offset(3, 4), places=15)

    def test_offset_degree_too_small(self) -> None:
        with self.assertRaises(RegimeError):
            internal_offset(2, 3)

    def test_default_offsets_bridge(self) -> None:
        sc = scenario("bridge")
        self.assertAlmostEqual(default_offsets(sc.selection)["e0"], math.log(2.0 / 3.0) / 4.0)

    # ------------------------------------------------------------------
    # dirichlet_data
    # ------------------------------------------------------------------

    def test_flower_data(self) -> None:
        sc = scenario("flower")
        eps = 8.0
        data = dirichlet_data(sc.selection, eps)
        p = 4.0 * 6.0 * math.exp(-eps) / 7.0
        self.assertAlmostEqual(data.p["v"] / p, 1.0, places=14)
        self.assertAlmostEqual(data.q1["v"] / p, 1.0, places=14)
        self.assertAlmostEqual(data.balance("v") / p, 0.0, places=12)

    def test_dumbbell_single_loop_data(self) -> None:
        sc = scenario("dumbbell", selection="one-loop")
        data = dirichlet_data(sc.selection, 8.0)
        self.assertEqual(list(data.p), ["vm"])
        self.assertAlmostEqual(data.p["vm"] / (8.0 * math.exp(-8.0) / 3.0), 1.0, places=14)
        self.assertEqual(data.offsets, {})

    def test_regime_threshold(self) -> None:
        sc = scenario("flower")
        with self.assertRaises(RegimeError):
            dirichlet_data(sc.selection, 2.0)

    def test_explicit_offsets_validated(self) -> None:
        sc = scenario("bridge")
        with self.assertRaises(SelectionError):
            dirichlet_data(sc.selection, 8.0, offsets={})
        with self.assertRaises(SelectionError):
            dirichlet_data(sc.selection, 8.0, offsets={"e0": 0.0, "hl1": 0.0})

    def test_large_offset_flagged(self) -> None:
        sc = scenario("bridge")
        data = dirichlet_data(sc.selection, 8.0, offsets={"e0": A_MAX + 0.5})
        self.assertEqual(data.flagged_offsets, ["e0"])

    def test_interval_explicit_offset(self) -> None:
        sc = scenario("interval", ell1=1.0, ell2=0.6, ell3=1.4)
        self.assertAlmostEqual(sc.offsets_at(10.0)["e2"], 2.0)
        data = sc.asymptotic_data(10.0)
        self.assertEqual(data.offsets, {"e2": sc.offsets_at(10.0)["e2"]})
        self.assertLess(data.p["v1"], data.p["v2"])

    def test_refine_reduces_balance(self) -> None:
        sc = scenario("flower")
        data = dirichlet_data(sc.selection, 8.0, refine=True)
        self.assertIsNotNone(data.q2_shot)
        self.assertLess(data.relative_balance("v"), 1e-3)

    # ------------------------------------------------------------------
    # audit_consistency
    # ------------------------------------------------------------------

    def test_audit_flower_passes(self) -> None:
        sc = scenario("flower")
        data = dirichlet_data(sc.selection, 8.0)
        report = audit_consistency(sc.selection, 8.0, data)
        self.assertTrue(report.passed)
        self.assertFalse(report.internal_applicable)
        self.assertLess(report.ratio("cubic", "v"), 1e-4)

    def test_audit_ratios_shrink(self) -> None:
        sc = scenario("flower")
        ratios = []
        for eps in (6.0, 8.0, 10.0):
            report = audit_consistency(sc.selection, eps, dirichlet_data(sc.selection, eps))
            ratios.append(report.ratio("remainder", "v"))
        self.assertTrue(ratios[0] > ratios[1] > ratios[2])

    def test_audit_internal_entries(self) -> None:
        sc = scenario("bridge")
        data = dirichlet_data(sc.selection, 12.0)
        report = audit_consistency(sc.selection, 12.0, data)
        self.assertTrue(report.internal_applicable)
        self.assertEqual(report.ratio("internal-neighbour", "e0@vl"), 0.0)
        self.assertIn("e0", report.error_terms)
        self.assertEqual(report.error_terms["e0"], 0.0)

    # ------------------------------------------------------------------
    # Tails and initial guesses
    # ------------------------------------------------------------------

    def test_tail_solution_halfline(self) -> None:
        z = np.linspace(0, 5, 6)
        np.testing.assert_allclose(tail_solution(z, HALFLINE, 0.3), 0.3 * np.exp(-z))

    def test_tail_solution_pendant_is_cosh(self) -> None:
        z = np.linspace(0, 4, 9)
        expected = 0.2 * np.cosh(4 - z) / np.cosh(4)
        np.testing.assert_allclose(tail_solution(z, PENDANT, 0.2, span=4.0), expected, rtol=1e-12)

    def test_tail_solution_two_ends(self) -> None:
        z = np.linspace(0, 3, 7)
        w = tail_solution(z, LOOPING, 0.1, 0.2, 3.0)
        expected = (0.1 * np.sinh(3 - z) + 0.2 * np.sinh(z)) / np.sinh(3)
        np.testing.assert_allclose(w, expected, rtol=1e-12)

    def test_initial_guess_vertex_values(self) -> None:
        sc = scenario("flower")
        eps = 8.0
        grid = build_grid(sc.graph, eps)
        data = dirichlet_data(sc.selection, eps)
        U = build_initial_guess(grid, sc.selection, data)
        self.assertAlmostEqual(U.at_vertex("v"), data.p["v"], places=15)
        z, w = U.on_edge("e1")
        self.assertAlmostEqual(float(np.max(w)), 1.0, places=3)
        self.assertGreater(float(np.min(U.values)), 0.0)

    def test_initial_guess_needs_scaled_grid(self) -> None:
        sc = scenario("flower")
        grid = build_grid(sc.graph, 8.0, scaled=False)
        with self.assertRaises(RegimeError):
            build_initial_guess(grid, sc.selection, dirichlet_data(sc.selection, 8.0))

    def test_pulse_seed_peaks(self) -> None:
        sc = scenario("interval", selection="mid-pulses")
        grid = build_grid(sc.graph, 8.0)
        U = sc.initial_guess(grid)
        z, w = U.on_edge("e1")
        self.assertAlmostEqual(float(z[np.argmax(w)]), 8.0 * 0.8, delta=grid.max_step)
        self.assertGreater(float(np.max(w)), 0.99)


if __name__ == "__main__":
    unittest.main()
