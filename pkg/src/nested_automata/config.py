"""Configuration management for nested-automata.

This module loads optional defaults from a YAML config file and turns them
into Click ``default_map`` entries. Priority order (handled by Click in
cli.py):
    1. CLI arguments (highest priority)
    2. Environment variables (NESTED_AUTOMATA_MAX_CONFIGS, NESTED_AUTOMATA_SEED)
    3. Config file (.nested-automata.yml)
    4. Default values (lowest priority)

Example config file:

    verify:
      mode: random
      samples: 500
      seed: ${CI_SEED}
    flatten:
      max_table_size: 4096
    speeds:
      u: 1.0
"""

import logging
import os
import re
from pathlib import Path
from typing import Any, Optional

import yaml

logger = logging.getLogger(__name__)

# Default config file names (searched in order)
DEFAULT_CONFIG_FILENAMES = (".nested-automata.yml", ".nested-automata.yaml")

DEFAULT_MODE = "exhaustive"
DEFAULT_MAX_CONFIGS = 65536
DEFAULT_SAMPLES = 1000
DEFAULT_SEED = 0
DEFAULT_VERIFY_STEPS = 16
DEFAULT_MAX_TABLE_SIZE = 65536
DEFAULT_U = 1.0
DEFAULT_RUN_STEPS = 16

ENV_MAX_CONFIGS = "NESTED_AUTOMATA_MAX_CONFIGS"
ENV_SEED = "NESTED_AUTOMATA_SEED"

# Mapping from YAML (section, key) to flat setting names
CONFIG_FIELD_MAPPING: dict[tuple[str, str], str] = {
    ("verify", "mode"): "verify_mode",
    ("verify", "max_configs"): "max_configs",
    ("verify", "samples"): "samples",
    ("verify", "seed"): "seed",
    ("verify", "steps"): "verify_steps",
    ("flatten", "max_table_size"): "max_table_size",
    ("speeds", "u"): "u",
    ("run", "steps"): "run_steps",
}

# Mapping from flat setting names to the (command, option) pairs they default.
# Single source of truth for cli.py's default_map.
CONFIG_TO_CLI_MAPPING: dict[str, tuple[tuple[str, str], ...]] = {
    "verify_mode": (("verify", "mode"),),
    "max_configs": (("verify", "max_configs"),),
    "samples": (("verify", "samples"),),
    "seed": (("verify", "seed"),),
    "verify_steps": (("verify", "steps"),),
    "max_table_size": (("verify", "max_table_size"), ("flatten", "max_table_size")),
    "u": (("speeds", "u"), ("trace", "u")),
    "run_steps": (("run", "steps"),),
}


def _interpolate_env_vars(value: str) -> str:
    """Expand ${VAR_NAME} patterns; unset variables expand to ""."""
    pattern = r"\$\{([^}]+)\}"

    def replace_env_var(match: re.Match[str]) -> str:
        return os.environ.get(match.group(1), "")

    return re.sub(pattern, replace_env_var, value)


def _interpolate_dict_values(data: dict[str, Any]) -> dict[str, Any]:
    result: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, str):
            result[key] = _interpolate_env_vars(value)
        elif isinstance(value, dict):
            result[key] = _interpolate_dict_values(value)
        else:
            result[key] = value
    return result


def load_yaml_config(config_path: Optional[Path] = None) -> dict[str, Any]:
    """Load configuration from a YAML file.

    Searches an explicit path if given, else .nested-automata.yml/.yaml in
    the current directory and then in the home directory.

    Returns:
        The nested configuration (empty dict if no file is found).

    Raises:
        ValueError: If the file contains invalid YAML or is not a mapping.
    """
    if config_path is not None:
        paths_to_try = [config_path]
    else:
        paths_to_try = [Path.cwd() / name for name in DEFAULT_CONFIG_FILENAMES]
        paths_to_try += [Path.home() / name for name in DEFAULT_CONFIG_FILENAMES]

    found_path = next((path for path in paths_to_try if path.exists()), None)
    if found_path is None:
        return {}

    try:
        data = yaml.safe_load(found_path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ValueError(f"Invalid YAML in config file {found_path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"Config file {found_path} must contain a mapping")
    logger.debug("Loaded config from %s", found_path)
    return _interpolate_dict_values(data)


def flatten_config(nested: dict[str, Any]) -> dict[str, Any]:
    """Flatten nested YAML sections into setting names.

    Unknown sections and keys are ignored with a warning.

    Example:
        >>> flatten_config({"verify": {"seed": 7}})
        {'seed': 7}
    """
    result: dict[str, Any] = {}
    known = set(CONFIG_FIELD_MAPPING)
    for section, entries in nested.items():
        if not isinstance(entries, dict):
            logger.warning("Ignoring config section %r: expected a mapping", section)
            continue
        for key in entries:
            if (section, key) not in known:
                logger.warning("Ignoring unknown config key %s.%s", section, key)

    for (section, key), field_name in CONFIG_FIELD_MAPPING.items():
        entries = nested.get(section)
        if isinstance(entries, dict) and key in entries:
            result[field_name] = entries[key]
    return result


def build_default_map(flat: dict[str, Any]) -> dict[str, dict[str, Any]]:
    """Turn flat settings into a per-command Click default_map.

    Example:
        >>> build_default_map({"u": 2.0})
        {'speeds': {'u': 2.0}, 'trace': {'u': 2.0}}
    """
    default_map: dict[str, dict[str, Any]] = {}
    for field_name, value in flat.items():
        for command, option in CONFIG_TO_CLI_MAPPING.get(field_name, ()):
            default_map.setdefault(command, {})[option] = value
    return default_map
