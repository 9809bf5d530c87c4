import argparse
import contextlib
import io
import math
import os
import tempfile
import unittest
from unittest import mock

from main import main, parse_expect, parse_params, parse_value
from workbench import EXIT_ERROR, EXIT_EXPECTATION, EXIT_OK


class TestParsing(unittest.TestCase):

    def test_parse_value(self) -> None:
        self.assertEqual(parse_value("3"), 3)
        self.assertEqual(parse_value("0.5"), 0.5)
        self.assertEqual(parse_value("1,1.5,2"), [1.0, 1.5, 2.0])
        self.assertEqual(parse_value("two-loops"), "two-loops")

    def test_parse_params(self) -> None:
        params = parse_params(["ell-zero=0.4", "selection=one-loop"])
        self.assertEqual(params, {"ell_zero": 0.4, "selection": "one-loop"})
        self.assertEqual(parse_params(None), {})
        with self.assertRaises(argparse.ArgumentTypeError):
            parse_params(["loops"])

    def test_parse_expect(self) -> None:
        self.assertEqual(parse_expect("2,0"), (2, 0))
        self.assertEqual(parse_expect("4"), (4, None))
        for bad in ("a,0", "1,2,3", ""):
            with self.assertRaises(argparse.ArgumentTypeError):
                parse_expect(bad)


class TestMain(unittest.TestCase):

    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self._tmp.name, "out")
        self.base = ["--config", os.path.join(self._tmp.name, "config.json"), "--out", self.out]

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def run_main(self, *args) -> int:
        return main(self.base + list(args))

    def run_captured(self, *args):
        buffer = io.StringIO()
        with contextlib.redirect_stdout(buffer):
            code = self.run_main(*args)
        return code, buffer.getvalue().splitlines()

    @staticmethod
    def read_rows(path: str):
        with open(path) as f:
            return [line.rstrip("\n") for line in f if not line.startswith("#")]

    # ------------------------------------------------------------------
    # Exit codes
    # ------------------------------------------------------------------

    def test_bump_outside_regime(self) -> None:
        self.assertEqual(self.run_main("bump", "--eps", "8", "--ell", "1", "--p", "0.002"), EXIT_ERROR)

    def test_missing_graph(self) -> None:
        self.assertEqual(self.run_main("validate"), EXIT_ERROR)

    def test_bad_scenario_parameter(self) -> None:
        self.assertEqual(self.run_main("--scenario", "flower", "--param", "loops=0", "validate"),
                         EXIT_ERROR)

    def test_bad_graph_file(self) -> None:
        path = os.path.join(self._tmp.name, "broken.graph")
        with open(path, "w") as f:
            f.write("vertex v\nloop e w halflength=1\n")
        self.assertEqual(self.run_main("--graph", path, "validate"), EXIT_ERROR)

    def test_invalid_override(self) -> None:
        self.assertEqual(self.run_main("--h", "-1", "period", "--p", "0.01", "--q", "0.005"),
                         EXIT_ERROR)

    def test_validate_flower(self) -> None:
        self.assertEqual(self.run_main("--scenario", "flower", "validate"), EXIT_OK)

    def test_options_after_command(self) -> None:
        self.assertEqual(self.run_main("validate", "--scenario", "flower", "--eps", "6"), EXIT_OK)

    def test_logging_configured_once(self) -> None:
        with mock.patch("workbench.configure_logging") as configure:
            self.assertEqual(self.run_main("--scenario", "flower", "validate"), EXIT_OK)
        configure.assert_called_once_with("info")

    def test_scenario_write(self) -> None:
        self.assertEqual(self.run_main("scenario", "dumbbell", "--write"), EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(self.out, "dumbbell_two-loops.graph")))

    # ------------------------------------------------------------------
    # CSV commands
    # ------------------------------------------------------------------

    def test_period_prints_csv(self) -> None:
        code, lines = self.run_captured("period", "--p", "0.01", "--q", "0.005")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(lines[0], "p,q,T_plus,log_approx,dT_dp,dT_dq")
        values = [float(v) for v in lines[1].split(",")]
        self.assertEqual(values[:2], [0.01, 0.005])
        self.assertAlmostEqual(values[3], -math.log(0.015 / 4.0), places=12)
        bound = 10.0 * (0.01 ** 2 + 0.005 ** 2) * (abs(math.log(0.01)) + abs(math.log(0.005)))
        self.assertLessEqual(abs(values[2] - values[3]), bound)
        self.assertLess(values[4], 0.0)
        self.assertLess(values[5], 0.0)

    def test_period_requires_both_values(self) -> None:
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit):
                self.run_main("period", "--p", "0.01")

    def test_asym_prints_csv(self) -> None:
        code, lines = self.run_captured("--scenario", "flower", "asym", "--eps", "8")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(lines[0], "# eps: 8")
        self.assertEqual(lines[1], "vertex,p,q1,q2,balance")
        vertex, p, q1, q2, _ = lines[2].split(",")
        self.assertEqual(vertex, "v")
        # leading order: p = 4 * 6 exp(-8) / 7, q1 = D p with D = 1
        self.assertAlmostEqual(float(p) / (24.0 * math.exp(-8.0) / 7.0), 1.0, places=12)
        self.assertAlmostEqual(float(q1), float(p), places=15)
        self.assertIn("# audit: pass", lines)

    def test_asym_lists_offsets(self) -> None:
        code, lines = self.run_captured("--scenario", "bridge", "asym", "--eps", "10")
        self.assertIn("edge,offset,flagged", lines)
        row = lines[lines.index("edge,offset,flagged") + 1].split(",")
        self.assertEqual(row[0], "e0")
        self.assertAlmostEqual(float(row[1]), math.log(2.0 / 3.0) / 4.0, places=12)
        self.assertEqual(row[2], "0")

    def test_bump_writes_samples(self) -> None:
        path = os.path.join(self._tmp.name, "bump.csv")
        code = self.run_main("bump", "--eps", "8", "--ell", "1", "--p", "0.0006", "--out", path)
        self.assertEqual(code, EXIT_OK)
        rows = self.read_rows(path)
        self.assertEqual(rows[0], "z,u,v")
        self.assertEqual(len(rows), 2002)
        first = [float(v) for v in rows[1].split(",")]
        last = [float(v) for v in rows[-1].split(",")]
        self.assertEqual(first[0], 0.0)
        self.assertAlmostEqual(first[2], 0.0, places=6)
        self.assertAlmostEqual(last[0], 8.0, places=12)
        self.assertAlmostEqual(last[1], 0.0006, places=12)
        self.assertLess(last[2], 0.0)

    def test_bump_reflected_samples(self) -> None:
        code = self.run_main("bump", "--eps", "6", "--p", "0.005", "--reflect", "--out", "even.csv")
        self.assertEqual(code, EXIT_OK)
        rows = self.read_rows(os.path.join(self.out, "even.csv"))
        self.assertEqual(len(rows), 1 + 4001)
        first = [float(v) for v in rows[1].split(",")]
        last = [float(v) for v in rows[-1].split(",")]
        self.assertAlmostEqual(first[0], -last[0], places=14)
        self.assertAlmostEqual(first[1], last[1], places=14)
        self.assertAlmostEqual(first[2], -last[2], places=14)

    # ------------------------------------------------------------------
    # State commands
    # ------------------------------------------------------------------

    def test_solve_writes_state(self) -> None:
        code = self.run_main("--scenario", "flower", "--param", "loops=1", "--eps", "6",
                             "--format", "dat", "solve")
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(self.out, "flower_eps6.csv")))
        self.assertTrue(os.path.exists(os.path.join(self.out, "flower_eps6.dat")))

    def test_solve_named_output(self) -> None:
        code = self.run_main("--scenario", "flower", "--param", "loops=1",
                             "solve", "--eps", "6", "--out", "state.csv")
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(self.out, "state.csv")))

    def test_morse_from_graph_file(self) -> None:
        path = os.path.join(self._tmp.name, "single.graph")
        with open(path, "w") as f:
            f.write("vertex v\nloop e v halflength=1\nhalfline h v\nselect e\n")
        self.assertEqual(self.run_main("--graph", path, "--eps", "6", "morse"), EXIT_OK)

    def test_morse_expectation(self) -> None:
        args = ["--scenario", "flower", "--param", "loops=1", "--eps", "6", "morse", "--expect"]
        self.assertEqual(self.run_main(*args, "1,0"), EXIT_OK)
        self.assertEqual(self.run_main(*args, "2,0"), EXIT_EXPECTATION)

    def test_spectrum_without_scan(self) -> None:
        code = self.run_main("--scenario", "flower", "--param", "loops=1",
                             "spectrum", "--eps", "6", "--out", "spec.csv")
        self.assertEqual(code, EXIT_OK)
        rows = self.read_rows(os.path.join(self.out, "spec.csv"))
        self.assertEqual(rows[0], "label,alpha,n,z,n_plus,nearest")
        self.assertEqual(len(rows), 2)
        self.assertTrue(rows[1].startswith("uniform,0,1,0,"))

    def test_spectrum_reports_sturm_counts(self) -> None:
        code, lines = self.run_captured("--scenario", "flower", "--param", "loops=1",
                                        "spectrum", "--eps", "6")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("  decoupled e1: n = 1, sturm 1", lines)
        self.assertIn("  decoupled remainder: n = 0", lines)
        self.assertTrue(os.path.exists(os.path.join(self.out, "flower_eps6_trace.csv")))


if __name__ == "__main__":
    unittest.main()
