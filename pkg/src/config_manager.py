"""
Configuration manager for workbench defaults stored in a JSON file.
"""
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

logger = logging.getLogger(__name__)

CONFIG_ENV = "QGNLS_CONFIG"
LOG_LEVELS = ("error", "info", "debug")

Alpha = Union[float, str]


def _default_config() -> Dict[str, Any]:
    return {
        "grid_step": 0.02,
        "newton_tol": 1e-10,
        "newton_max_iter": 50,
        "lambda_tol": 1e-11,
        "halfline_cut": 15.0,
        "eps_ladder": [6, 8, 10, 12],
        "alpha_grid": [0, 0.25, 0.5, 1, 2, 4, 8, 16, 32, 64, 128, 256, "inf"],
        "random_rays": 8,
        "seed": 20210131,
        "sweep_workers": 1,
        "log_level": "info",
        "output_dir": ".",
    }


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def parse_alpha(value: Alpha) -> float:
    """Robin parameter from a config entry; "inf" stands for Dirichlet."""
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        raise ValueError(f"Unknown alpha entry '{value}'")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"Alpha entries must be numbers or 'inf', got {value!r}")
    return float(value)


class ConfigurationManager:
    def __init__(self, config_path: Optional[Path] = None):
        """Initialize the configuration manager.

        Args:
            config_path: JSON file to use; defaults to $QGNLS_CONFIG or
                ~/.qgnls/config.json
        """
        self._config_path = Path(config_path) if config_path else self._get_config_file_path()
        self._config: Dict[str, Any] = _default_config()
        self._update_handlers: List[Callable[[], None]] = []

    @property
    def path(self) -> Path:
        return self._config_path

    def add_update_handler(self, handler: Callable[[], None]) -> None:
        """Add a handler to be called when configuration is saved.

        Args:
            handler: Function to call when configuration changes
        """
        if handler not in self._update_handlers:
            self._update_handlers.append(handler)

    def remove_update_handler(self, handler: Callable[[], None]) -> None:
        if handler in self._update_handlers:
            self._update_handlers.remove(handler)

    def _notify_update(self) -> None:
        for handler in self._update_handlers:
            try:
                handler()
            except Exception as e:
                logger.error("Error in configuration update handler: %s", e)

    def load(self) -> bool:
        """Load configuration from file.

        A missing file is created with defaults; an invalid one is replaced
        by defaults.

        Returns:
            bool: True if configuration was loaded successfully, False otherwise
        """
        try:
            if not self._config_path.exists():
                return self.save()

            with open(self._config_path, 'r') as f:
                loaded_config = json.load(f)

            if self._validate_loaded_config(loaded_config):
                self._config.update(loaded_config)
                return True

            logger.warning("Invalid configuration found in %s, using defaults", self._config_path)
            self._config = _default_config()
            return self.save()

        except (OSError, json.JSONDecodeError) as e:
            logger.error("Error loading configuration: %s", e)
            return False

    def save(self) -> bool:
        """Save current configuration to file.

        Returns:
            bool: True if configuration was saved successfully, False otherwise
        """
        try:
            os.makedirs(self._config_path.parent, exist_ok=True)
            with open(self._config_path, 'w') as f:
                json.dump(self._config, f, indent=4)
            self._notify_update()
            return True

        except OSError as e:
            logger.error("Error saving configuration: %s", e)
            return False

    def get_grid_step(self) -> float:
        """Grid step in scaled units."""
        return float(self._config["grid_step"])

    def set_grid_step(self, step: float) -> None:
        if not _is_number(step) or step <= 0:
            raise ValueError("Grid step must be a positive number")
        self._config["grid_step"] = step

    def get_newton_tol(self) -> float:
        return float(self._config["newton_tol"])

    def set_newton_tol(self, tol: float) -> None:
        if not _is_number(tol) or tol <= 0:
            raise ValueError("Newton tolerance must be a positive number")
        self._config["newton_tol"] = tol

    def get_newton_max_iter(self) -> int:
        return self._config["newton_max_iter"]

    def set_newton_max_iter(self, count: int) -> None:
        if not _is_int(count) or count < 1:
            raise ValueError("Newton iteration limit must be at least 1")
        self._config["newton_max_iter"] = count

    def get_lambda_tol(self) -> float:
        """Half-width of the window treated as the zero eigenvalue."""
        return float(self._config["lambda_tol"])

    def set_lambda_tol(self, tol: float) -> None:
        if not _is_number(tol) or tol <= 0:
            raise ValueError("Eigenvalue tolerance must be a positive number")
        self._config["lambda_tol"] = tol

    def get_halfline_cut(self) -> float:
        return float(self._config["halfline_cut"])

    def set_halfline_cut(self, cut: float) -> None:
        if not _is_number(cut) or cut <= 0:
            raise ValueError("Half-line cut-off must be a positive number")
        self._config["halfline_cut"] = cut

    def get_eps_ladder(self) -> List[float]:
        return [float(e) for e in self._config["eps_ladder"]]

    def set_eps_ladder(self, ladder: List[float]) -> None:
        if not ladder or not all(_is_number(e) and e > 0 for e in ladder):
            raise ValueError("Epsilon ladder must be a nonempty list of positive numbers")
        self._config["eps_ladder"] = list(ladder)

    def get_alpha_grid(self) -> List[float]:
        """Robin parameters of the homotopy scan, 'inf' mapped to math.inf."""
        return [parse_alpha(a) for a in self._config["alpha_grid"]]

    def set_alpha_grid(self, grid: List[Alpha]) -> None:
        values = [parse_alpha(a) for a in grid]
        if not values or values != sorted(values) or values[0] < 0:
            raise ValueError("Alpha grid must be nonempty, nonnegative and increasing")
        self._config["alpha_grid"] = ["inf" if math.isinf(a) else a for a in values]

    def get_random_rays(self) -> int:
        return self._config["random_rays"]

    def set_random_rays(self, count: int) -> None:
        if not _is_int(count) or count < 0:
            raise ValueError("Random ray count must be a nonnegative integer")
        self._config["random_rays"] = count

    def get_seed(self) -> int:
        return self._config["seed"]

    def set_seed(self, seed: int) -> None:
        if not _is_int(seed) or seed < 0:
            raise ValueError("Seed must be a nonnegative integer")
        self._config["seed"] = seed

    def get_sweep_workers(self) -> int:
        return self._config["sweep_workers"]

    def set_sweep_workers(self, workers: int) -> None:
        if not _is_int(workers) or workers < 1:
            raise ValueError("Sweep worker count must be at least 1")
        self._config["sweep_workers"] = workers

    def get_log_level(self) -> str:
        return self._config["log_level"]

    def set_log_level(self, level: str) -> None:
        if level not in LOG_LEVELS:
            raise ValueError(f"Log level must be one of {', '.join(LOG_LEVELS)}")
        self._config["log_level"] = level

    def get_output_dir(self) -> Path:
        return Path(self._config["output_dir"])

    def set_output_dir(self, path: Path) -> None:
        self._config["output_dir"] = str(path)

    def validate_configuration(self) -> bool:
        """Validate the current configuration.

        Returns:
            bool: True if configuration is valid, False otherwise
        """
        return self._validate_loaded_config(self._config)

    def _get_config_file_path(self) -> Path:
        """Get the path to the configuration file.

        Returns:
            $QGNLS_CONFIG when set, otherwise config.json under ~/.qgnls
        """
        override = os.environ.get(CONFIG_ENV)
        if override:
            return Path(override)
        return Path.home() / ".qgnls" / "config.json"

    def _validate_loaded_config(self, config: Dict[str, Any]) -> bool:
        """Validate loaded configuration data.

        Unknown keys make the file invalid; missing keys keep their defaults.

        Args:
            config: Configuration dictionary to validate

        Returns:
            bool: True if configuration is valid, False otherwise
        """
        if not isinstance(config, dict) or set(config) - set(_default_config()):
            return False

        checks = {
            "grid_step": lambda v: _is_number(v) and v > 0,
            "newton_tol": lambda v: _is_number(v) and v > 0,
            "newton_max_iter": lambda v: _is_int(v) and v >= 1,
            "lambda_tol": lambda v: _is_number(v) and v > 0,
            "halfline_cut": lambda v: _is_number(v) and v > 0,
            "eps_ladder": lambda v: isinstance(v, list) and v and all(_is_number(e) and e > 0 for e in v),
            "random_rays": lambda v: _is_int(v) and v >= 0,
            "seed": lambda v: _is_int(v) and v >= 0,
            "sweep_workers": lambda v: _is_int(v) and v >= 1,
            "log_level": lambda v: v in LOG_LEVELS,
            "output_dir": lambda v: isinstance(v, str),
        }
        for key, check in checks.items():
            if key in config and not check(config[key]):
                return False

        if "alpha_grid" in config:
            if not isinstance(config["alpha_grid"], list):
                return False
            try:
                values = [parse_alpha(a) for a in config["alpha_grid"]]
            except ValueError:
                return False
            if not values or values != sorted(values) or values[0] < 0:
                return False
        return True
