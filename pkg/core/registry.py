"""
Problem registry for ParaSurf.

Lazily builds and caches the expensive shared objects of a run: parsed
surfaces, grids (with their eigenbases) and cohomological solvers. One
instance is shared by every job of a sweep, so a grid's eigenbasis and a
solver's SVD are computed once.
"""

import json
import threading
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from engine.cohomology.solver import CohomologySolver
from engine.dynamics.hamiltonian import Hamiltonian
from engine.spectral.grid import Grid
from engine.surface.origami import load_origami_file
from models.experiment import ExperimentConfig
from models.surface import Direction, TranslationSurface
from utils.logger import get_logger

logger = get_logger('Registry')


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything a command needs to start computing."""
    surface: TranslationSurface
    grid: Grid
    direction: Direction
    hamiltonian: Hamiltonian
    ce: CohomologySolver


class Registry:
    """
    Cache of surfaces, grids and cohomological solvers with lazy loading.

    All lookups are thread-safe; instances are created on first access and
    reused afterwards (singleton per key).
    """

    def __init__(self):
        """Initialize the registry."""
        self._surfaces: Dict[str, TranslationSurface] = {}
        self._grids: Dict[Tuple[str, int, bool], Grid] = {}
        self._solvers: Dict[Tuple[Any, ...], CohomologySolver] = {}
        self._lock = threading.RLock()

    def surface(self, path: str) -> TranslationSurface:
        """
        Get a parsed surface by file path.

        Raises:
            ParseError, NotAPermutation, GaussBonnetMismatch: Invalid OrigamiSpec
        """
        with self._lock:
            if path not in self._surfaces:
                logger.info(f"Loading surface: {path}")
                self._surfaces[path] = load_origami_file(path)
            return self._surfaces[path]

    def grid(self, surface_path: str, resolution: int, dealias: bool = True) -> Grid:
        """Get the grid of a surface at a resolution."""
        key = (surface_path, int(resolution), bool(dealias))
        with self._lock:
            if key not in self._grids:
                surface = self.surface(surface_path)
                logger.debug(f"Creating grid for {surface.name} at N={resolution}")
                self._grids[key] = Grid(surface, int(resolution), dealias)
            return self._grids[key]

    def cohomology(self, grid: Grid, direction: Direction, config: Optional[Dict[str, Any]] = None) -> CohomologySolver:
        """Get the cohomological solver of a grid in a direction."""
        config = config or {}
        key = (id(grid), direction.xi, direction.diophantine_floor, json.dumps(config, sort_keys=True, default=str))
        with self._lock:
            if key not in self._solvers:
                self._solvers[key] = CohomologySolver(grid, direction, config)
            return self._solvers[key]

    def problem(self, experiment: ExperimentConfig) -> Problem:
        """
        Build the problem an experiment describes.

        Args:
            experiment: Validated experiment

        Returns:
            Problem
        """
        numerics = experiment.section('numerics')
        grid = self.grid(experiment.surface_path, experiment.resolution, bool(numerics.get('dealias', True)))
        direction = experiment.direction
        hamiltonian = Hamiltonian.from_config(grid.surface, experiment.hamiltonian)
        cohomology = experiment.section('cohomology')
        if not grid.is_torus:
            n_modes = max(int(numerics.get('n_modes', 200)), int(cohomology.get('n_candidates', 200)) + 1)
            grid.build_basis(n_modes)
        ce = self.cohomology(grid, direction, cohomology)
        return Problem(grid.surface, grid, direction, hamiltonian, ce)

    def get_status(self) -> Dict[str, int]:
        with self._lock:
            return {'surfaces': len(self._surfaces), 'grids': len(self._grids), 'solvers': len(self._solvers)}
