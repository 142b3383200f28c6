"""
Application configuration using Pydantic Settings.

Runtime settings come from BLIMP_* environment variables (and an optional
.env file). Training configuration is resolved with the precedence

    preset defaults < JSON config file < BLIMP_TRAIN__* environment < CLI overrides
"""

import json
import sys
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ConfigError
from app.models.config import PRESETS, PidGains, TrainConfig
from app.models.params import ModelParams


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="BLIMP_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    environment: Literal["development", "ci", "production"] = "development"
    log_level: str = "INFO"
    log_dir: Optional[Path] = None
    seed: int = 0
    out_dir: Path = Path("runs")
    model_params_path: Path = Path("config/model_params.json")
    pid_gains_path: Path = Path("config/pid_gains.json")

    @property
    def is_development(self) -> bool:
        """Check if running interactively."""
        return self.environment == "development"


class TrainEnvOverrides(BaseSettings):
    """Nested training overrides, e.g. BLIMP_TRAIN__SAC__BATCH_SIZE=128."""

    model_config = SettingsConfigDict(
        env_prefix="BLIMP_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )

    train: dict[str, Any] = {}


def validate_settings() -> Settings:
    """
    Load and validate runtime settings.

    Raises:
        ValueError: If a BLIMP_* variable has an invalid value
    """
    try:
        s = Settings()
    except Exception as e:
        print(f"Configuration load error: {str(e)}", file=sys.stderr)
        raise ValueError(
            f"Configuration validation failed. Check BLIMP_* environment "
            f"variables. Error: {str(e)}"
        ) from e
    return s


def deep_merge(*layers: Mapping[str, Any]) -> dict[str, Any]:
    """Merge mappings left to right; nested mappings merge key by key."""
    merged: dict[str, Any] = {}
    for layer in layers:
        for key, value in layer.items():
            if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
                merged[key] = deep_merge(merged[key], value)
            else:
                merged[key] = value
    return merged


def read_json_file(path: Path, what: str) -> dict[str, Any]:
    """
    Read a JSON object from disk.

    Raises:
        ConfigError: If the file is missing or not a JSON object
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what} file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{what} file {path} must contain a JSON object")
    return data


def _format_validation_error(what: str, exc: ValidationError) -> str:
    details = []
    for error in exc.errors():
        field_path = ".".join(str(x) for x in error["loc"])
        details.append(f"{field_path}: {error['msg']}")
    return f"Invalid {what}: " + " | ".join(details)


def load_train_config(
    config_path: Optional[Path] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> TrainConfig:
    """
    Resolve the training configuration from all sources.

    Args:
        config_path: Optional JSON config file
        preset: Optional preset name ("paper" or "desk"), applied as a CLI override
        overrides: Explicit command-line overrides (highest precedence)

    Returns:
        Validated TrainConfig

    Raises:
        ConfigError: If a source is unreadable or the merged config is invalid
    """
    file_layer = read_json_file(config_path, "Training config") if config_path else {}

    try:
        env_layer = TrainEnvOverrides().train
    except ValidationError as e:
        raise ConfigError(_format_validation_error("BLIMP_TRAIN__* environment", e)) from e

    cli_layer: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"Unknown preset '{preset}'. Choose one of {sorted(PRESETS)}")
        cli_layer = dict(PRESETS[preset])
    cli_layer = deep_merge(cli_layer, overrides or {})

    merged = deep_merge(PRESETS["paper"], file_layer, env_layer, cli_layer)
    try:
        return TrainConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(_format_validation_error("training config", e)) from e


def load_model_params(path: Path) -> ModelParams:
    """
    Load vehicle parameters from JSON; unknown keys are rejected.

    Raises:
        ConfigError: If the file is missing or fails validation
    """
    data = read_json_file(path, "Model parameter")
    data.pop("_units", None)
    try:
        return ModelParams.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error("model parameters", e)) from e


def load_pid_gains(path: Optional[Path]) -> PidGains:
    """Load PID-SPG gains; defaults when no file is given."""
    if path is None:
        return PidGains()
    data = read_json_file(path, "PID gains")
    data.pop("_tuning", None)
    try:
        return PidGains.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation_error("PID gains", e)) from e


# Load and validate settings
try:
    settings = validate_settings()
except ValueError as e:
    print(f"Configuration error: {e}", file=sys.stderr)
    sys.exit(2)
