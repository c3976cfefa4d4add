"""
Embeddings u: M -> M x R^2 near the trivial section u_0(x) = (x, xi).

u(x) = (x + w1(x), xi + w2(x)), with the displacement w stored as one 4x1
Field in global translation coordinates.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from engine.spectral.grid import Grid
from engine.surface.flow import distance_to_cone_points
from models.field import Field
from models.surface import Direction
from utils.logger import get_logger

logger = get_logger('Embedding')

# Standard symplectic matrix [[0, I], [-I, 0]]
J = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])


def symplectic_field(grid: Grid) -> Field:
    """J as a constant 4x4 field."""
    return Field.constant(grid, J)


@dataclass(frozen=True, eq=False)
class Embedding:
    """
    Embedding of the surface into its trivialized tangent bundle.

    Attributes:
        w: Displacement (4x1): rows 0-1 base, rows 2-3 fiber
        direction: The direction xi of the reference section
    """
    w: Field
    direction: Direction

    def __post_init__(self):
        if self.w.shape != (4, 1):
            raise ValueError(f"embedding displacement must be 4x1, got {self.w.shape}")

    @classmethod
    def trivial(cls, grid: Grid, direction: Direction) -> 'Embedding':
        """u_0(x) = (x, xi)."""
        return cls(Field.zeros(grid, (4, 1)), direction)

    @classmethod
    def random(cls, grid: Grid, direction: Direction, amplitude: float, rng: np.random.Generator,
               band: int = 2) -> 'Embedding':
        """
        Band-limited random displacement with sup norm `amplitude`.

        The trigonometric modes are 1-periodic in every square, hence smooth on
        any origami; on surfaces with cone points the base part is multiplied
        by sin^2(pi x) sin^2(pi y) so that it vanishes at every vertex.
        """
        sq, x, y = grid.nodes()
        comps = []
        for _ in range(4):
            values = np.zeros(grid.node_shape)
            for m in range(-band, band + 1):
                for n in range(-band, band + 1):
                    a, b = rng.standard_normal(2)
                    phase = 2.0 * np.pi * (m * x + n * y)
                    values = values + a * np.cos(phase) + b * np.sin(phase)
            comps.append(values)
        values = np.array(comps)
        if grid.surface.cone_points:
            values[:2] *= (np.sin(np.pi * x) * np.sin(np.pi * y)) ** 2
        values = amplitude * values / max(np.max(np.abs(values)), 1e-300)
        return cls(Field(grid, values[:, None]), direction)

    @property
    def grid(self) -> Grid:
        return self.w.grid

    @property
    def w1(self) -> Field:
        return self.w.rows(0, 2)

    @property
    def w2(self) -> Field:
        return self.w.rows(2, 4)

    def displaced(self, delta: Field) -> 'Embedding':
        """u + delta, same direction."""
        return Embedding(self.w + delta, self.direction)

    def points(self) -> Tuple[np.ndarray, ...]:
        """(square, x, y, p1, p2) of u at every node; x, y may leave [0, 1)."""
        sq, x, y = self.grid.nodes()
        w = self.w.values[:, 0]
        xi = self.direction.xi
        return sq, x + w[0], y + w[1], xi[0] + w[2], xi[1] + w[3]

    def jacobian(self) -> Field:
        """Du (4x2): [[I + Dw1], [Dw2]]."""
        grid = self.grid
        dw = grid.gradient(self.w)
        base = np.zeros((4, 2))
        base[:2] = np.eye(2)
        return dw + base[:, :, None, None, None]

    def drift(self) -> Field:
        """X_xi u = (xi + X_xi w1, X_xi w2)."""
        xw = self.grid.lie_derivative(self.w, self.direction)
        offset = np.zeros((4, 1))
        offset[:2, 0] = self.direction.xi
        return xw + offset[:, :, None, None, None]

    def check_displacement(self) -> float:
        """
        Largest ratio |w1(x)| / d(x, Sigma) over nodes away from Sigma.

        The displacement bound holds when the value is below 1. Nodes on Sigma
        must not move at all; any motion there returns inf.
        """
        grid = self.grid
        sq, x, y = grid.nodes()
        w1 = self.w.values[:2, 0]
        shift = np.hypot(w1[0], w1[1])
        dist = distance_to_cone_points(grid.surface, sq, x, y)
        on_sigma = dist == 0.0
        if np.any(shift[on_sigma] > 1e-12):
            logger.warning("Embedding moves a cone point")
            return float('inf')
        ratio = np.where(on_sigma, 0.0, shift / np.where(on_sigma, 1.0, dist))
        return float(np.max(ratio))

    def distance_to(self, other: 'Embedding') -> float:
        return (self.w - other.w).l2_norm()
