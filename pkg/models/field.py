"""
Field data models for ParaSurf.

A Field is a matrix-valued function sampled on a Grid: values[r, c, s, ix, iy]
is entry (r, c) at node (ix/N, iy/N) of square s. Scalars are 1x1, embedding
displacements 4x1, linearization symbols 2x2 or 4x4.
"""

import json
import os
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable, Dict, Tuple, Union

import numpy as np

if TYPE_CHECKING:
    from engine.spectral.grid import Grid

# Byte layout of Field files
FIELD_DTYPE = '<f8'
FIELD_LAYOUT = 'rows, cols, square, ix, iy'


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Field:
    """
    Matrix-valued function on a surface grid.

    Attributes:
        grid: The Grid the values live on
        values: Read-only array of shape (rows, cols, S, N, N)
    """
    grid: 'Grid'
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 3:
            values = values[None, None]
        if values.ndim != 5 or values.shape[2:] != self.grid.node_shape:
            raise ValueError(
                f"Field values must have shape (rows, cols) + {self.grid.node_shape}, got {values.shape}"
            )
        object.__setattr__(self, 'values', _readonly(values))

    # construction

    @classmethod
    def zeros(cls, grid: 'Grid', shape: Tuple[int, int] = (1, 1)) -> 'Field':
        return cls(grid, np.zeros(tuple(shape) + grid.node_shape))

    @classmethod
    def constant(cls, grid: 'Grid', value: Union[float, np.ndarray]) -> 'Field':
        """Field equal to a constant scalar or matrix everywhere."""
        value = np.atleast_2d(np.asarray(value, dtype=float))
        values = np.broadcast_to(value[:, :, None, None, None], value.shape + grid.node_shape)
        return cls(grid, values)

    @classmethod
    def from_function(cls, grid: 'Grid', fn: Callable[[np.ndarray, np.ndarray, np.ndarray], Any]) -> 'Field':
        """
        Sample fn(x, y, square) on the grid nodes.

        fn may return a scalar array or a nested list (rows x cols) of arrays.
        """
        sq, x, y = grid.nodes()
        out = fn(x, y, sq)
        if isinstance(out, (list, tuple)):
            rows = [[np.broadcast_to(np.asarray(e, dtype=float), grid.node_shape) for e in row] for row in out]
            values = np.array(rows)
        else:
            values = np.broadcast_to(np.asarray(out, dtype=float), grid.node_shape)[None, None]
        return cls(grid, values)

    @classmethod
    def stack(cls, blocks) -> 'Field':
        """Stack fields vertically (all with equal column counts)."""
        blocks = list(blocks)
        return cls(blocks[0].grid, np.concatenate([b.values for b in blocks], axis=0))

    # shape

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape[0], self.values.shape[1]

    @property
    def surface(self):
        return self.grid.surface

    def entry(self, i: int, j: int = 0) -> 'Field':
        return Field(self.grid, self.values[i:i + 1, j:j + 1])

    def rows(self, start: int, stop: int) -> 'Field':
        return Field(self.grid, self.values[start:stop])

    def transpose(self) -> 'Field':
        return Field(self.grid, np.swapaxes(self.values, 0, 1))

    # arithmetic

    def _other_values(self, other):
        if isinstance(other, Field):
            return other.values
        return other

    def __add__(self, other) -> 'Field':
        return Field(self.grid, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other) -> 'Field':
        return Field(self.grid, self.values - self._other_values(other))

    def __rsub__(self, other) -> 'Field':
        return Field(self.grid, self._other_values(other) - self.values)

    def __neg__(self) -> 'Field':
        return Field(self.grid, -self.values)

    def __mul__(self, other) -> 'Field':
        """Scalar multiple, or pointwise product with a 1x1 Field."""
        return Field(self.grid, self.values * self._other_values(other))

    __rmul__ = __mul__

    def matmul(self, other: 'Field') -> 'Field':
        """Pointwise matrix product (no dealiasing)."""
        return Field(self.grid, np.einsum('ij...,jk...->ik...', self.values, other.values))

    # reductions

    def integral(self) -> np.ndarray:
        """Integral over the surface, per entry (rows, cols)."""
        return self.values.sum(axis=(2, 3, 4)) * self.grid.weight

    def mean(self) -> np.ndarray:
        """Average over the surface, per entry (rows, cols)."""
        return self.integral() / self.grid.surface.area

    def inner(self, other: 'Field') -> float:
        """L2 inner product summed over entries."""
        return float(np.sum(self.values * other.values) * self.grid.weight)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @cached_property
    def coeffs(self) -> np.ndarray:
        """Spectral coefficients: 2-D Fourier on the torus, eigencoefficients on origamis."""
        return self.grid.coefficients(self.values)

    # IO

    def sidecar(self) -> Dict[str, Any]:
        rows, cols = self.shape
        return {
            'surface': self.grid.surface.name,
            'n_squares': self.grid.surface.n_squares,
            'resolution': self.grid.resolution,
            'shape': [rows, cols],
            'dtype': 'float64-le',
            'layout': FIELD_LAYOUT,
        }

    def save(self, path: str) -> None:
        """
        Write values as little-endian float64 in C order, plus a JSON sidecar
        at <path>.json.

        Args:
            path: Target .bin path
        """
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        np.ascontiguousarray(self.values, dtype=FIELD_DTYPE).tofile(path)
        with open(path + '.json', 'w') as f:
            json.dump(self.sidecar(), f, sort_keys=True, indent=2)
            f.write('\n')

    @classmethod
    def load(cls, path: str, grid: 'Grid') -> 'Field':
        """
        Read a Field written by save().

        Args:
            path: .bin path (sidecar expected at <path>.json)
            grid: Grid matching the sidecar

        Returns:
            Field
        """
        with open(path + '.json', 'r') as f:
            meta = json.load(f)
        if meta['resolution'] != grid.resolution or meta['n_squares'] != grid.surface.n_squares:
            raise ValueError(f"Field file {path} does not match grid {grid}")
        rows, cols = meta['shape']
        values = np.fromfile(path, dtype=FIELD_DTYPE).reshape((rows, cols) + grid.node_shape)
        return cls(grid, values)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """
    Friedrichs Laplacian eigenbasis on a grid.

    Attributes:
        eigenvalues: Ascending non-negative eigenvalues lambda_n
        fields: Eigenfields as node arrays, shape (n_modes, S, N, N), orthonormal
            for the node quadrature
        labels: Optional mode labels (torus: (m, n, 'cos'|'sin'|'const'))
    """
    eigenvalues: np.ndarray
    fields: np.ndarray
    labels: Tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'eigenvalues', _readonly(self.eigenvalues))
        object.__setattr__(self, 'fields', _readonly(self.fields))

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def frequencies(self) -> np.ndarray:
        """Dyadic frequency sqrt(lambda)/(2 pi) per mode."""
        return np.sqrt(np.maximum(self.eigenvalues, 0.0)) / (2.0 * np.pi)

    def eigenfield(self, grid: 'Grid', n: int) -> Field:
        return Field(grid, self.fields[n][None, None])
