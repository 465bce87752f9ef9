"""Configuration management for realsr: cache directory, presets and training config files."""

import configparser
import os
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError as PydanticValidationError

from ..utils.exceptions import ConfigurationError, DataIOError
from .models import LossWeights, Preset, Stage, TrainConfig

CACHE_ENV = "REALSR_CACHE"
_SECTION = "realsr"

# Stage and preset defaults. Crop and batch values are per preset, optimizer
# settings per stage.
STAGE_DEFAULTS: Dict[Stage, Dict[str, Any]] = {
    Stage.DDL: {"lr": 2e-4, "beta1": 0.5, "beta2": 0.999, "epochs": 200},
    Stage.SR: {"lr": 1e-4, "beta1": 0.9, "beta2": 0.999, "iterations": 50000},
}
PRESET_DEFAULTS: Dict[Preset, Dict[str, Any]] = {
    Preset.DESK: {"hr_crop": 64, "batch_size": 4, "checkpoint_every": 50},
    Preset.FULL: {"hr_crop": 128, "batch_size": 16, "checkpoint_every": 1000},
}

WEIGHT_KEYS = set(LossWeights.model_fields)


class ConfigManager:
    """Resolves the cache directory and assembles training configurations."""

    def __init__(self):
        """Initialize configuration manager."""
        self.cache_dir = self._get_cache_directory()

    def _get_cache_directory(self) -> Path:
        """Get cache directory path.

        Returns:
            ``$REALSR_CACHE`` if set, else ``./.realsr`` if it exists, else ``~/.realsr``
        """
        env_dir = os.environ.get(CACHE_ENV)
        if env_dir:
            return Path(env_dir).expanduser()

        # Try local cache first, then user cache
        local_cache = Path.cwd() / ".realsr"
        if local_cache.exists():
            return local_cache

        return Path.home() / ".realsr"

    def ensure_cache_directory(self) -> Path:
        """Ensure the cache directory exists."""
        try:
            self.weights_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"cannot create cache directory '{self.cache_dir}': {e}")
        return self.cache_dir

    @property
    def weights_dir(self) -> Path:
        return self.cache_dir / "weights"

    def resolve_weights(self, name: str) -> Path:
        """Resolve a weight reference: an existing path, or a file name inside the cache.

        Raises:
            DataIOError: Neither exists
        """
        candidate = Path(name).expanduser()
        if candidate.exists():
            return candidate
        cached = self.weights_dir / name
        if cached.exists():
            return cached
        raise DataIOError(f"weight file '{name}' not found (looked in '{self.weights_dir}')")

    def load_config_file(self, path: Path) -> Dict[str, str]:
        """Read a flat ``key = value`` file.

        Args:
            path: Config file path

        Returns:
            Raw string values by key
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise DataIOError(f"cannot read config '{path}': {e}")

        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str  # keep key case
        try:
            parser.read_string(f"[{_SECTION}]\n{text}", source=str(path))
        except configparser.Error as e:
            raise ConfigurationError(f"malformed config '{path}': {e}")
        return dict(parser.items(_SECTION))

    def build_train_config(
        self,
        stage: Stage,
        preset: Preset = Preset.DESK,
        file_values: Optional[Dict[str, Any]] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> TrainConfig:
        """Merge stage/preset defaults, config file values and command-line overrides.

        Args:
            stage: Training stage
            preset: Preset supplying crop and batch defaults
            file_values: Values from :meth:`load_config_file`
            overrides: Values given on the command line (``None`` entries are ignored)

        Returns:
            Validated training config

        Raises:
            ConfigurationError: Unknown keys or invalid values
        """
        merged: Dict[str, Any] = {"stage": stage}
        merged.update(STAGE_DEFAULTS[stage])
        file_values = dict(file_values or {})
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

        # A preset named in the file or on the command line picks the defaults.
        chosen = overrides.get("preset", file_values.get("preset", preset))
        try:
            chosen = Preset(chosen)
        except ValueError:
            raise ConfigurationError(f"unknown preset '{chosen}'")
        merged.update(PRESET_DEFAULTS[chosen])
        merged["preset"] = chosen

        weights: Dict[str, Any] = {}
        for source in (file_values, overrides):
            for key, value in source.items():
                if key in WEIGHT_KEYS:
                    weights[key] = value
                elif key == "stage":
                    if getattr(value, "value", value) != stage.value:
                        raise ConfigurationError(f"config is for stage '{value}', not '{stage.value}'")
                else:
                    merged[key] = value
        merged["weights"] = weights

        try:
            return TrainConfig.model_validate(merged)
        except PydanticValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise ConfigurationError(f"invalid training configuration: {problems}")


def dump_train_config(config: TrainConfig) -> str:
    """Render a config as a flat ``key = value`` file that :meth:`ConfigManager.load_config_file` reads back."""
    values = config.model_dump(mode="json", exclude={"weights"})
    values.update(config.weights.model_dump(mode="json"))
    lines = []
    for key, value in values.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
