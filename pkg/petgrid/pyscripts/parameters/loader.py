import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any

import yaml
from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException

from .models import PipelineConfig
from .validator import PipelineConfigValidator
from ..types.builtin_resource import BuiltinResource
from ..types.errors import ConfigInvalid
from ..utils.common_utils import setup_logger

logger = setup_logger(__name__)


class ConfigLoader:
    """Load petgrid configuration: shipped defaults <- user file <- CLI overrides."""

    _DEFAULT_CONFIG_PATH = BuiltinResource.DEFAULT_CONFIG.path

    def __init__(self, default_config_path: str | Path | None = None):
        self._default_config_path = Path(default_config_path) if default_config_path else self._DEFAULT_CONFIG_PATH

    def _read_config_file(self, path: Path) -> dict[str, Any]:
        """Parse a YAML, JSON or TOML file into a dict.

        Args:
            path: Path to the config file

        Returns:
            Parsed mapping (empty for an empty file)

        Raises:
            ConfigInvalid: If the file is missing, unreadable or not a mapping
        """
        if not path.is_file():
            raise ConfigInvalid(f"Config file not found: {path}")
        try:
            if path.suffix.lower() == ".toml":
                with open(path, "rb") as f:
                    config = tomllib.load(f)
            elif path.suffix.lower() == ".json":
                with open(path, "r", encoding="utf-8") as f:
                    config = json.load(f)
            else:
                with open(path, "r", encoding="utf-8") as f:
                    config = yaml.safe_load(f)
        except (OSError, yaml.YAMLError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
            raise ConfigInvalid(f"Failed to parse config {path}: {e}") from e

        config = config if config is not None else {}
        if not isinstance(config, dict):
            raise ConfigInvalid(f"Config {path} must contain a mapping, got {type(config).__name__}")
        return config

    def load_defaults(self) -> dict[str, Any]:
        """Load the shipped default config, or an empty mapping with a warning."""
        path = self._default_config_path
        if not path.exists():
            logger.warning(f"Default config file not found: {path}")
            return {}
        try:
            return self._read_config_file(path)
        except ConfigInvalid as e:
            logger.warning(f"Failed to load default config: {e}")
            return {}

    def load(self, config_path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
        """Merge defaults, an optional user config file and overrides into a PipelineConfig.

        Args:
            config_path: Optional YAML/JSON/TOML file
            overrides: Nested mapping applied last (CLI flags)

        Returns:
            The merged configuration (not yet range-validated)

        Raises:
            ConfigInvalid: On unknown keys, type mismatches or unreadable files
        """
        layers = [self.load_defaults()]
        if config_path:
            layers.append(self._read_config_file(Path(config_path)))
        if overrides:
            layers.append(overrides)

        config = self._merge(PipelineConfig, layers)
        logger.debug(f"Loaded config:\n{config}")
        return config

    def load_section(self, path: str | Path, section_class: type, section_key: str) -> Any:
        """Load one config section from a stand-alone file.

        The file may hold the section under `section_key` or as top-level keys.

        Args:
            path: YAML/JSON/TOML file
            section_class: Section dataclass, e.g. SegParams
            section_key: Section name, e.g. "seg"

        Returns:
            Section dataclass instance

        Raises:
            ConfigInvalid: On unknown keys, type mismatches or unreadable files
        """
        data = self._read_config_file(Path(path))
        if set(data) == {section_key} and isinstance(data[section_key], dict):
            data = data[section_key]
        section = self._merge(section_class, [data])
        logger.debug(f"Loaded {section_key} section from {path}: {section}")
        return section

    @staticmethod
    def _merge(schema_class: type, layers: list[dict[str, Any]]) -> Any:
        """Strictly merge layers over a structured schema and build the dataclass."""
        try:
            schema = OmegaConf.structured(schema_class)
            merged = OmegaConf.merge(schema, *layers)
            return OmegaConf.to_object(merged)
        except OmegaConfBaseException as e:
            raise ConfigInvalid(f"Invalid configuration: {e}") from e


def load_pipeline_config(
    config_path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> PipelineConfig:
    """Load and validate the pipeline configuration.

    Raises:
        ConfigInvalid: With every validation error listed
    """
    config = ConfigLoader().load(config_path, overrides)
    PipelineConfigValidator().validate_or_raise(config)
    return config
