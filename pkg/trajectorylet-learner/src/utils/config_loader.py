"""
Configuration Loader for the trajectorylet learner

Builds a PipelineConfig from, in increasing priority:
1. dataset preset
2. key=value config file
3. TRAJ_<KEY> environment variables (and a .env file in the working directory)
4. explicit overrides (CLI flags)

Usage:
    from src.utils.config_loader import load_config

    config = load_config("configs/action3d.env", overrides={"n_clusters": 200})
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from src.config.pipeline_config import PipelineConfig, get_preset
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)

ENV_PREFIX = "TRAJ_"
REQUIRED_FILE_KEYS = ("pool_seed", "cluster_seed", "cv_seed")


class ConfigLoader:
    """Merge presets, config file, environment and overrides into a PipelineConfig"""

    def __init__(self, env_prefix: str = ENV_PREFIX, use_dotenv: bool = True):
        self.env_prefix = env_prefix
        self.use_dotenv = use_dotenv
        self.sources: Dict[str, str] = {}

    def load_from_file(self, path: Union[str, Path]) -> Dict[str, str]:
        """Read a key=value config file (comments with #, blank lines ignored)"""
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")

        values = {k.strip().lower(): v for k, v in dotenv_values(path).items() if v is not None}
        missing = [key for key in REQUIRED_FILE_KEYS if key not in values]
        if missing:
            raise ConfigurationError(f"config file {path} is missing required key(s): {', '.join(missing)}")

        for key in values:
            self.sources[key] = str(path)
        logger.info(f"Loaded {len(values)} setting(s) from {path}")
        return values

    def load_from_env(self, environ: Optional[Mapping[str, str]] = None) -> Dict[str, str]:
        """Collect TRAJ_<KEY> variables"""
        if environ is None:
            if self.use_dotenv:
                load_dotenv(override=False)
            environ = os.environ

        values = {}
        for name, value in environ.items():
            if name.startswith(self.env_prefix):
                key = name[len(self.env_prefix):].lower()
                values[key] = value
                self.sources[key] = f"env:{name}"
        if values:
            logger.info(f"Environment overrides: {', '.join(sorted(values))}")
        return values

    def load_config(
        self,
        config_file: Optional[Union[str, Path]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        environ: Optional[Mapping[str, str]] = None,
        dataset: Optional[str] = None,
    ) -> PipelineConfig:
        """
        Load the complete configuration.

        The dataset preset is chosen from (highest first) overrides, environment,
        config file, then the `dataset` argument.
        """
        file_values = self.load_from_file(config_file) if config_file else {}
        env_values = self.load_from_env(environ)
        explicit = {k: v for k, v in (overrides or {}).items() if v is not None}
        for key in explicit:
            self.sources[key] = "override"

        chosen = (explicit.get("dataset") or env_values.get("dataset")
                  or file_values.get("dataset") or dataset or "action3d")

        merged: Dict[str, Any] = {"dataset": chosen}
        merged.update(get_preset(chosen))
        merged.update(file_values)
        merged.update(env_values)
        merged.update(explicit)

        unknown = sorted(set(merged) - set(PipelineConfig.model_fields))
        if unknown:
            raise ConfigurationError(f"unknown configuration key(s): {', '.join(unknown)}")

        try:
            return PipelineConfig(**merged)
        except ValidationError as e:
            raise ConfigurationError(f"invalid configuration: {e}") from e


def load_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
    dataset: Optional[str] = None,
) -> PipelineConfig:
    """Convenience wrapper around ConfigLoader.load_config"""
    return ConfigLoader(use_dotenv=environ is None).load_config(
        config_file=config_file, overrides=overrides, environ=environ, dataset=dataset
    )


def write_config(config: PipelineConfig, path: Union[str, Path]) -> Path:
    """Write the config in the same key=value format load_from_file reads"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.to_text(), encoding="utf-8")
    return path
