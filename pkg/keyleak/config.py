"""
KeyLeak Configuration - defaults from environment variables, overridable by
a key-value config file and then by command-line flags
"""
import logging
import os
from functools import lru_cache
from typing import Any, Dict, Optional

from dotenv import dotenv_values
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings

from .exceptions import ConfigError
from .models import ProtocolParams, RunConfig

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Run defaults loaded from environment variables"""

    # Run settings
    seed: int = Field(default=0, alias="KEYLEAK_SEED")
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, alias="KEYLEAK_WORKERS")
    exact: bool = Field(default=True, alias="KEYLEAK_EXACT")
    output_format: str = Field(default="json", alias="KEYLEAK_FORMAT")
    output: Optional[str] = Field(default=None, alias="KEYLEAK_OUTPUT")
    log_level: str = Field(default="WARNING", alias="KEYLEAK_LOG_LEVEL")

    # Budgets
    search_budget: int = Field(default=100_000, alias="KEYLEAK_SEARCH_BUDGET")
    subset_budget: int = Field(default=1 << 20, alias="KEYLEAK_SUBSET_BUDGET")

    # Sweeps
    sweep_instances: int = Field(default=1000, alias="KEYLEAK_SWEEP_INSTANCES")
    sweep_bits: int = Field(default=6, alias="KEYLEAK_SWEEP_BITS")

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"  # Ignore extra env vars


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


# Run fields a config file may set, by their config-file key
RUN_KEYS = {
    "seed": "seed",
    "workers": "workers",
    "exact": "exact",
    "format": "output_format",
    "output_format": "output_format",
    "out": "output",
    "output": "output",
    "search_budget": "search_budget",
    "subset_budget": "subset_budget",
    "sweep_instances": "sweep_instances",
    "sweep_bits": "sweep_bits",
    "log_level": "log_level",
}


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Read a key-value config file.

    Plain keys override run settings. Dotted keys ``<set>.<field>`` define
    named ProtocolParams sets, e.g. ``theory.d_level=1e-9``.

    Returns:
        dict with "run" overrides and validated "params_sets".

    Raises:
        ConfigError: missing file, unknown key or invalid params set.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values = dotenv_values(path)
    run: Dict[str, Any] = {}
    raw_sets: Dict[str, Dict[str, Any]] = {}
    for key, value in values.items():
        key = key.strip().lower()
        if value is None:
            raise ConfigError(f"config key '{key}' has no value")
        if "." in key:
            set_name, field_name = key.split(".", 1)
            raw_sets.setdefault(set_name, {"name": set_name})[field_name] = value
        elif key in RUN_KEYS:
            run[RUN_KEYS[key]] = value
        else:
            raise ConfigError(f"unknown config key '{key}'")

    params_sets: Dict[str, ProtocolParams] = {}
    for name, fields in raw_sets.items():
        try:
            params_sets[name] = ProtocolParams(**fields)
        except ValidationError as e:
            raise ConfigError(f"invalid params set '{name}': {e.errors()[0]['msg']}") from e
    logger.debug(f"Loaded config {path}: {sorted(run)} and {len(params_sets)} params sets")
    return {"run": run, "params_sets": params_sets}


def build_run_config(
    command: str,
    cli_overrides: Dict[str, Any],
    config_path: Optional[str] = None,
    settings: Optional[Settings] = None,
) -> RunConfig:
    """
    Merge settings, the config file and command-line flags (command line wins).

    ``cli_overrides`` entries set to None are treated as not given.
    """
    settings = settings or get_settings()
    merged: Dict[str, Any] = {
        "seed": settings.seed,
        "workers": settings.workers,
        "exact": settings.exact,
        "output_format": settings.output_format,
        "output": settings.output,
        "log_level": settings.log_level,
        "search_budget": settings.search_budget,
        "subset_budget": settings.subset_budget,
        "sweep_instances": settings.sweep_instances,
        "sweep_bits": settings.sweep_bits,
    }
    params_sets: Dict[str, ProtocolParams] = {}
    if config_path:
        loaded = load_config_file(config_path)
        merged.update(loaded["run"])
        params_sets = loaded["params_sets"]
    options = dict(cli_overrides.pop("options", {}) or {})
    inputs = list(cli_overrides.pop("inputs", []) or [])
    merged.update({key: value for key, value in cli_overrides.items() if value is not None})
    try:
        return RunConfig(command=command, inputs=inputs, params_sets=params_sets, options=options, **merged)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {e.errors()[0]['loc']} {e.errors()[0]['msg']}") from e
