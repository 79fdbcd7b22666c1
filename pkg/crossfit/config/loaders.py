"""
Configuration loaders.

Handles loading of fit configurations and simulation presets from the
JSON files under ``configs/``.
"""

import dataclasses
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from ..errors import ConfigError
from ..simulation.simulate import SimConfig
from ..solver.schall import FitConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

THREADS_ENV_VAR = "CROSSFIT_THREADS"


def resolve_threads(threads: Optional[int] = None) -> int:
    """
    Resolve the column-parallel degree.

    An explicit value wins, then ``CROSSFIT_THREADS``, then the CPU count.
    """
    if threads is not None:
        if threads < 1:
            raise ConfigError(f"threads must be at least 1, got {threads}")
        return threads

    env_value = os.environ.get(THREADS_ENV_VAR)
    if env_value:
        try:
            value = int(env_value)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got '{env_value}'")
        if value < 1:
            raise ConfigError(f"{THREADS_ENV_VAR} must be at least 1, got {value}")
        return value

    return os.cpu_count() or 1


def _read_json(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"Config not found: {path}")
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}")


def _check_keys(data: Dict[str, Any], cls: type, source: Path) -> Dict[str, Any]:
    """Drop the free-text description and reject keys the dataclass lacks."""
    allowed = {f.name for f in dataclasses.fields(cls)}
    values = {k: v for k, v in data.items() if k != "description"}
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in {source.name}: {', '.join(unknown)}")
    return values


class ConfigLoader:
    """Loads fit configurations and simulation presets."""

    def __init__(self, config_dir: str | Path = DEFAULT_CONFIG_DIR):
        self.config_dir = Path(config_dir)
        self.fit_dir = self.config_dir / "fit"
        self.presets_dir = self.config_dir / "presets"

    def load_fit_config(self, name: str = "default", **overrides: Any) -> FitConfig:
        """
        Load a fit configuration by name.

        Args:
            name: Config name under ``configs/fit`` (without ``.json``)
            **overrides: Field values that replace the file's values; ``None`` is ignored

        Returns:
            A validated FitConfig
        """
        return self.load_fit_config_file(self.fit_dir / f"{name}.json", **overrides)

    def load_fit_config_file(self, path: str | Path, **overrides: Any) -> FitConfig:
        """Load a fit configuration from an explicit file path."""
        path = Path(path)
        values = _check_keys(_read_json(path), FitConfig, path)
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            config = FitConfig(**values)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid fit config {path.name}: {e}")
        logger.debug("Loaded fit config from %s", path)
        return config

    def load_preset(self, name: str, s: float, seed: int = 0, **overrides: Any) -> SimConfig:
        """
        Load a simulation preset and bind it to a size parameter and seed.

        Args:
            name: Preset name under ``configs/presets`` (e.g. ``"a"``)
            s: Size parameter S
            seed: Base random seed
            **overrides: Field values that replace the preset's values; ``None`` is ignored

        Returns:
            A validated SimConfig
        """
        if name not in self.available_presets():
            raise ConfigError(f"Unknown preset '{name}'; available: {', '.join(self.available_presets())}")
        path = self.presets_dir / f"{name}.json"
        values = _check_keys(_read_json(path), SimConfig, path)
        values.update({k: v for k, v in overrides.items() if v is not None})
        values["s"] = s
        values["seed"] = seed
        try:
            return SimConfig(**values)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid preset {path.name}: {e}")

    def available_presets(self) -> list[str]:
        """Preset names found under the presets directory."""
        return sorted(p.stem for p in self.presets_dir.glob("*.json"))
