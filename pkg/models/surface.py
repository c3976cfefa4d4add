"""
Surface data models for ParaSurf.

A translation surface is stored as square-tiled (origami) data: n unit
squares glued by two permutations. Squares are 0-indexed internally; the
OrigamiSpec text format is 1-indexed.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

# Corner names, in the order used by TranslationSurface.corner_vertex
CORNERS = ('bl', 'br', 'tl', 'tr')
CORNER_OFFSETS = {'bl': (0.0, 0.0), 'br': (1.0, 0.0), 'tl': (0.0, 1.0), 'tr': (1.0, 1.0)}


@dataclass(frozen=True)
class ConePoint:
    """
    A cone point of total angle 2*pi*(k+1).

    Attributes:
        vertex: Vertex id (index into TranslationSurface.vertex_squares)
        square: Representative square whose bottom-left corner is the point
        corner: Corner name of the representative ('bl')
        k: Cone parameter (k >= 1)
    """
    vertex: int
    square: int
    corner: str
    k: int

    @property
    def angle(self) -> float:
        return 2.0 * np.pi * (self.k + 1)


@dataclass(frozen=True)
class TranslationSurface:
    """
    Square-tiled translation surface.

    Attributes:
        name: Surface name from the spec file
        n_squares: Number of unit squares
        h_perm: Right neighbour of each square (0-indexed)
        v_perm: Upper neighbour of each square (0-indexed)
        vertex_squares: For each vertex, the squares whose bottom-left corner it is
        cone_points: Vertices with cone parameter k >= 1
        genus: Genus from Gauss-Bonnet
    """
    name: str
    n_squares: int
    h_perm: Tuple[int, ...]
    v_perm: Tuple[int, ...]
    vertex_squares: Tuple[Tuple[int, ...], ...]
    cone_points: Tuple[ConePoint, ...]
    genus: int
    _bl_vertex: Tuple[int, ...] = field(repr=False, compare=False, default=())

    @property
    def area(self) -> float:
        return float(self.n_squares)

    @property
    def is_torus(self) -> bool:
        return self.n_squares == 1 and not self.cone_points

    @property
    def h_inv(self) -> Tuple[int, ...]:
        inv = [0] * self.n_squares
        for i, j in enumerate(self.h_perm):
            inv[j] = i
        return tuple(inv)

    @property
    def v_inv(self) -> Tuple[int, ...]:
        inv = [0] * self.n_squares
        for i, j in enumerate(self.v_perm):
            inv[j] = i
        return tuple(inv)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_squares)

    def vertex_k(self, vertex: int) -> int:
        """Cone parameter of a vertex (0 for regular points)."""
        return len(self.vertex_squares[vertex]) - 1

    def corner_vertex(self, square: int, corner: str) -> int:
        """
        Vertex id at a corner of a square.

        Args:
            square: Square index (0-indexed)
            corner: One of 'bl', 'br', 'tl', 'tr'

        Returns:
            int: Vertex id
        """
        if corner == 'bl':
            return self._bl_vertex[square]
        if corner == 'br':
            return self._bl_vertex[self.h_perm[square]]
        if corner == 'tl':
            return self._bl_vertex[self.v_perm[square]]
        if corner == 'tr':
            return self._bl_vertex[self.h_perm[self.v_perm[square]]]
        raise ValueError(f"Unknown corner: {corner}")

    def cone_corners(self, square: int) -> Tuple[str, ...]:
        """Names of the corners of a square that are cone points."""
        return tuple(c for c in CORNERS if self.vertex_k(self.corner_vertex(square, c)) >= 1)

    def cone_corner_mask(self) -> np.ndarray:
        """Boolean array (n_squares, 4) marking cone corners in CORNERS order."""
        mask = np.zeros((self.n_squares, 4), dtype=bool)
        for s in range(self.n_squares):
            for c_idx, c in enumerate(CORNERS):
                mask[s, c_idx] = self.vertex_k(self.corner_vertex(s, c)) >= 1
        return mask


@dataclass(frozen=True)
class Direction:
    """
    Translation direction xi = (xi1, xi2) of the flow X_xi.

    Attributes:
        xi: Direction vector, not both components zero
        diophantine_floor: Lower bound required for |m*xi1 + n*xi2| on the torus
    """
    xi: Tuple[float, float]
    diophantine_floor: float = 1e-12

    def __post_init__(self):
        if len(self.xi) != 2:
            raise ValueError(f"Direction needs two components, got {self.xi}")
        if self.xi[0] == 0.0 and self.xi[1] == 0.0:
            raise ValueError("Direction must not be zero")
        if self.diophantine_floor <= 0.0:
            raise ValueError(f"diophantine_floor must be positive, got {self.diophantine_floor}")

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.xi, dtype=float)

    def divisor(self, m, n):
        """Small divisor m*xi1 + n*xi2 (works on arrays)."""
        return m * self.xi[0] + n * self.xi[1]


@dataclass(frozen=True)
class SurfacePoint:
    """A point given by its square and in-square coordinates in [0, 1)."""
    square: int
    x: float
    y: float
