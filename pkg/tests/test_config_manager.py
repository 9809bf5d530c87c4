import json
import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from config_manager import CONFIG_ENV, ConfigurationManager, parse_alpha


class TestConfigurationManager(unittest.TestCase):

    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.path = Path(self._tmp.name) / "qgnls" / "config.json"
        self.config = ConfigurationManager(self.path)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    # ------------------------------------------------------------------
    # load / save
    # ------------------------------------------------------------------

    def test_first_load_writes_defaults(self) -> None:
        self.assertTrue(self.config.load())
        self.assertTrue(self.path.exists())
        with open(self.path) as f:
            stored = json.load(f)
        self.assertEqual(stored["seed"], 20210131)
        self.assertEqual(stored["alpha_grid"][-1], "inf")

    def test_defaults(self) -> None:
        self.assertEqual(self.config.get_grid_step(), 0.02)
        self.assertEqual(self.config.get_newton_tol(), 1e-10)
        self.assertEqual(self.config.get_newton_max_iter(), 50)
        self.assertEqual(self.config.get_lambda_tol(), 1e-11)
        self.assertEqual(self.config.get_eps_ladder(), [6.0, 8.0, 10.0, 12.0])
        self.assertTrue(math.isinf(self.config.get_alpha_grid()[-1]))
        self.assertEqual(self.config.get_alpha_grid()[0], 0.0)
        self.assertEqual(self.config.get_random_rays(), 8)
        self.assertEqual(self.config.get_sweep_workers(), 1)
        self.assertEqual(self.config.get_log_level(), "info")
        self.assertEqual(self.config.get_output_dir(), Path("."))
        self.assertTrue(self.config.validate_configuration())

    def test_round_trip(self) -> None:
        self.config.set_grid_step(0.01)
        self.config.set_seed(7)
        self.config.set_alpha_grid([0, 1, "inf"])
        self.assertTrue(self.config.save())
        reloaded = ConfigurationManager(self.path)
        self.assertTrue(reloaded.load())
        self.assertEqual(reloaded.get_grid_step(), 0.01)
        self.assertEqual(reloaded.get_seed(), 7)
        self.assertEqual(reloaded.get_alpha_grid(), [0.0, 1.0, math.inf])

    def test_partial_file_keeps_defaults(self) -> None:
        os.makedirs(self.path.parent)
        with open(self.path, "w") as f:
            json.dump({"newton_tol": 1e-8}, f)
        self.assertTrue(self.config.load())
        self.assertEqual(self.config.get_newton_tol(), 1e-8)
        self.assertEqual(self.config.get_random_rays(), 8)

    def test_invalid_file_replaced(self) -> None:
        os.makedirs(self.path.parent)
        with open(self.path, "w") as f:
            json.dump({"grid_step": -1, "colour": "red"}, f)
        self.assertTrue(self.config.load())
        self.assertEqual(self.config.get_grid_step(), 0.02)
        with open(self.path) as f:
            self.assertNotIn("colour", json.load(f))

    def test_corrupt_json(self) -> None:
        os.makedirs(self.path.parent)
        with open(self.path, "w") as f:
            f.write("{not json")
        self.assertFalse(self.config.load())

    def test_update_handlers(self) -> None:
        calls = []
        handler = lambda: calls.append(1)
        self.config.add_update_handler(handler)
        self.config.add_update_handler(handler)
        self.config.save()
        self.assertEqual(calls, [1])
        self.config.remove_update_handler(handler)
        self.config.save()
        self.assertEqual(calls, [1])

    def test_failing_handler_does_not_break_save(self) -> None:
        def broken():
            raise RuntimeError("boom")
        self.config.add_update_handler(broken)
        self.assertTrue(self.config.save())

    def test_environment_override(self) -> None:
        override = Path(self._tmp.name) / "elsewhere.json"
        with mock.patch.dict(os.environ, {CONFIG_ENV: str(override)}):
            self.assertEqual(ConfigurationManager().path, override)

    # ------------------------------------------------------------------
    # Setters
    # ------------------------------------------------------------------

    def test_setters_reject_invalid_values(self) -> None:
        cases = ((self.config.set_grid_step, 0),
                 (self.config.set_grid_step, math.nan),
                 (self.config.set_newton_tol, -1e-3),
                 (self.config.set_newton_max_iter, 0),
                 (self.config.set_newton_max_iter, 2.5),
                 (self.config.set_lambda_tol, 0.0),
                 (self.config.set_halfline_cut, -2),
                 (self.config.set_eps_ladder, []),
                 (self.config.set_eps_ladder, [6, -1]),
                 (self.config.set_alpha_grid, [1, 0]),
                 (self.config.set_alpha_grid, [-1, 0]),
                 (self.config.set_alpha_grid, ["big"]),
                 (self.config.set_random_rays, -1),
                 (self.config.set_seed, True),
                 (self.config.set_sweep_workers, 0),
                 (self.config.set_log_level, "verbose"))
        for setter, value in cases:
            with self.assertRaises(ValueError, msg=(setter.__name__, value)):
                setter(value)

    def test_parse_alpha(self) -> None:
        self.assertTrue(math.isinf(parse_alpha("inf")))
        self.assertTrue(math.isinf(parse_alpha(" Infinity ")))
        self.assertEqual(parse_alpha(4), 4.0)
        with self.assertRaises(ValueError):
            parse_alpha(None)
        with self.assertRaises(ValueError):
            parse_alpha(False)


if __name__ == "__main__":
    unittest.main()
