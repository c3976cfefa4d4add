"""
Experiment configuration for ParaSurf runs.

An experiment YAML file is merged over config/system.yaml and validated here;
every validation failure is a ConfigError (exit code 1).
"""

import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import yaml

from engine.errors import ConfigError
from engine.spectral.grid import is_power_of_two
from models.surface import Direction
from utils.helpers import make_rng
from utils.logger import get_logger
from utils.path_helper import load_system_config, merge_config, resolve_path

logger = get_logger('Experiment')

MIN_RESOLUTION = 16
DEFAULT_SURFACE = 'config/surfaces/torus.origami'


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Validated experiment settings.

    Attributes:
        name: Experiment name (file stem unless set)
        surface_path: Absolute path of the OrigamiSpec file
        xi: Direction vector
        diophantine_floor: Small-divisor floor
        hamiltonian: 'hamiltonian' section (terms, epsilon, mask_radius)
        resolution: Nodes per square side
        s, t: Sobolev orders
        seed: RNG seed
        sections: The full merged configuration
        source: Path of the experiment file (None for defaults only)
    """
    name: str
    surface_path: str
    xi: Tuple[float, float]
    diophantine_floor: float
    hamiltonian: Dict[str, Any]
    resolution: int
    s: float
    t: float
    seed: int
    sections: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    @property
    def direction(self) -> Direction:
        return Direction(self.xi, self.diophantine_floor)

    def section(self, name: str) -> Dict[str, Any]:
        """A config section, with solver sections carrying the Sobolev orders."""
        data = dict(self.sections.get(name, {}) or {})
        if name == 'solver':
            data.setdefault('s', self.s)
            data.setdefault('t', self.t)
            data.update(self.sections.get('tolerances', {}) or {})
        if name == 'cohomology':
            data.update((self.sections.get('tolerances', {}) or {}).get('cohomology', {}) or {})
        return data

    def with_overrides(self, overrides: Dict[str, Any]) -> 'ExperimentConfig':
        """Re-validate with extra overrides merged on top (used by sweeps)."""
        return build_experiment(merge_config(self.sections, overrides), self.source, self.name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'surface': os.path.basename(self.surface_path),
            'xi': list(self.xi),
            'diophantine_floor': self.diophantine_floor,
            'hamiltonian': self.hamiltonian,
            'resolution': self.resolution,
            's': self.s,
            't': self.t,
            'seed': self.seed,
        }


def _number(data: Dict[str, Any], key: str, default: Any, kind=float):
    value = data.get(key, default)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' must be a {kind.__name__}, got {value!r}")


def build_experiment(config: Dict[str, Any], source: Optional[str] = None,
                     name: Optional[str] = None) -> ExperimentConfig:
    """
    Validate a merged configuration.

    Args:
        config: System defaults merged with the experiment file
        source: Experiment file path (relative paths resolve against its directory)
        name: Experiment name override

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: Missing files, bad resolution, bad seed or zero direction
    """
    base_dir = os.path.dirname(os.path.abspath(source)) if source else None

    surface = config.get('surface', DEFAULT_SURFACE)
    if isinstance(surface, dict):
        surface = surface.get('path', DEFAULT_SURFACE)
    surface_path = resolve_path(str(surface), base_dir)
    if not os.path.isfile(surface_path):
        raise ConfigError(f"surface file not found: {surface}")

    numerics = config.get('numerics', {}) or {}
    resolution = config.get('resolution', numerics.get('resolution', 32))
    if isinstance(resolution, bool) or not isinstance(resolution, int):
        raise ConfigError(f"resolution must be an integer, got {resolution!r}")
    if not is_power_of_two(resolution) or resolution < MIN_RESOLUTION:
        raise ConfigError(f"resolution must be a power of two >= {MIN_RESOLUTION}, got {resolution}")

    seed = config.get('seed', 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")

    direction = config.get('direction', {}) or {}
    xi = direction.get('xi', [1.0, 0.6180339887498949])
    if not isinstance(xi, (list, tuple)) or len(xi) != 2:
        raise ConfigError(f"direction.xi must have two components, got {xi!r}")
    try:
        xi = (float(xi[0]), float(xi[1]))
    except (TypeError, ValueError):
        raise ConfigError(f"direction.xi must be numeric, got {xi!r}")
    if xi == (0.0, 0.0):
        raise ConfigError("direction.xi must not be zero")
    floor = _number(direction, 'diophantine_floor', 1e-12)
    if floor <= 0.0:
        raise ConfigError(f"direction.diophantine_floor must be positive, got {floor}")

    sobolev = config.get('sobolev', {}) or {}
    hamiltonian = dict(config.get('hamiltonian', {}) or {})
    hamiltonian.setdefault('mask_radius', (config.get('dynamics', {}) or {}).get('mask_radius', 0.1))
    for term in hamiltonian.get('terms', []) or []:
        if not isinstance(term, dict) or 'expr' not in term:
            raise ConfigError(f"hamiltonian terms need an 'expr' entry, got {term!r}")

    if name is None:
        name = config.get('name') or (os.path.splitext(os.path.basename(source))[0] if source else 'default')

    return ExperimentConfig(
        name=str(name),
        surface_path=surface_path,
        xi=xi,
        diophantine_floor=floor,
        hamiltonian=hamiltonian,
        resolution=resolution,
        s=_number(sobolev, 's', (config.get('solver', {}) or {}).get('s', 2.0)),
        t=_number(sobolev, 't', (config.get('solver', {}) or {}).get('t', 1.0)),
        seed=seed,
        sections=config,
        source=source,
    )


def load_experiment(path: Optional[str] = None, seed: Optional[int] = None,
                    system_config: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment file.

    Args:
        path: Experiment YAML (None: system defaults only)
        seed: --seed override
        system_config: Preloaded system defaults

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: Unreadable file or invalid values
    """
    defaults = system_config if system_config is not None else load_system_config()
    overrides: Dict[str, Any] = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"experiment config not found: {path}")
        try:
            with open(path, 'r') as f:
                overrides = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            logger.error(f"Error parsing experiment config {path}: {e}")
            raise ConfigError(f"cannot parse {path}: {e}")
        if not isinstance(overrides, dict):
            raise ConfigError(f"experiment config {path} must be a mapping")
    if seed is not None:
        overrides['seed'] = seed

    experiment = build_experiment(merge_config(defaults, overrides), path)
    logger.info(
        f"Experiment '{experiment.name}': surface {os.path.basename(experiment.surface_path)}, "
        f"N={experiment.resolution}, xi={experiment.xi}, seed={experiment.seed}"
    )
    return experiment


@dataclass(eq=False)
class RunContext:
    """
    What a command gets to work with.

    Attributes:
        command: Command name
        experiment: Validated experiment
        run_dir: RunDirectory for the artifacts
        registry: Shared Registry of surfaces, grids and solvers
        workers: Worker count for sweeps (None: from config)
    """
    command: str
    experiment: ExperimentConfig
    run_dir: Any
    registry: Any
    workers: Optional[int] = None

    def options(self, defaults: Dict[str, Any]) -> Dict[str, Any]:
        """Command defaults overridden by the experiment's section of the same name."""
        return merge_config(defaults, self.experiment.sections.get(self.command, {}) or {})

    def rng(self):
        """A fresh generator seeded from the experiment."""
        return make_rng(self.experiment.seed)
