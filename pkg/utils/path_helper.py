"""
Path helper for ParaSurf.

Resolves project resources (config files, bundled surfaces) relative to the
project root, loads the system defaults and decides where run artifacts go.
"""

import copy
import os
from typing import Any, Dict, Optional

import yaml

from utils.logger import get_logger

logger = get_logger('PathHelper')

# Environment variable that overrides the --out flag
OUT_ENV_VAR = 'PARASURF_OUT'


def get_project_root() -> str:
    """
    Get project root directory.

    Returns:
        Absolute path to the project root
    """
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def get_resource_path(relative_path: str) -> str:
    """
    Get absolute path to a resource shipped with the project.

    Args:
        relative_path: Relative path from project root (e.g., 'config/system.yaml')

    Returns:
        Absolute path to the resource
    """
    return os.path.join(get_project_root(), relative_path)


def get_config_path(config_file: str) -> str:
    """
    Get path to a file in the config/ directory.

    Args:
        config_file: Name of config file (e.g., 'system.yaml')

    Returns:
        Absolute path to the config file
    """
    return get_resource_path(os.path.join('config', config_file))


def resolve_path(path: str, base_dir: Optional[str] = None) -> str:
    """
    Resolve a possibly relative path.

    Relative paths are tried against base_dir first (usually the directory of
    the experiment config that mentions them), then against the project root.

    Args:
        path: Path as written in a config file
        base_dir: Directory to resolve against first

    Returns:
        Absolute path (may not exist; callers validate)
    """
    if os.path.isabs(path):
        return path
    if base_dir is not None:
        candidate = os.path.join(base_dir, path)
        if os.path.exists(candidate):
            return os.path.abspath(candidate)
    return get_resource_path(path)


def merge_config(defaults: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Deep-merge two config dictionaries, overrides winning.

    Args:
        defaults: Default configuration (left untouched)
        overrides: User configuration

    Returns:
        Merged config dictionary
    """
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_system_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load the system defaults (config/system.yaml).

    Args:
        config_path: Optional explicit path

    Returns:
        dict: Configuration data (empty dict if the file is missing)
    """
    if config_path is None:
        config_path = get_config_path('system.yaml')

    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f) or {}
        logger.debug(f"Loaded system configuration from: {config_path}")
        return config
    except FileNotFoundError:
        logger.warning(f"System configuration not found: {config_path}, using built-in defaults")
        return {}


def resolve_run_dir(out: Optional[str], command: str) -> str:
    """
    Decide the run directory for a command and create it.

    The PARASURF_OUT environment variable wins over the --out flag; without
    either, runs go to runs/<command> under the project root.

    Args:
        out: Value of the --out flag (may be None)
        command: Command name, used for the default location

    Returns:
        Absolute path to an existing run directory
    """
    env_out = os.environ.get(OUT_ENV_VAR)
    if env_out:
        if out and out != env_out:
            logger.info(f"{OUT_ENV_VAR} overrides --out ({out} -> {env_out})")
        out = env_out

    if not out:
        out = get_resource_path(os.path.join('runs', command))

    run_dir = os.path.abspath(out)
    os.makedirs(run_dir, exist_ok=True)
    return run_dir
