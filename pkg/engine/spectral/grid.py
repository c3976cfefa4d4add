"""
Sampling grid for ParaSurf fields.

Nodes sit at (ix/N, iy/N) in every square. Derivatives are spectral along the
horizontal and vertical cylinders of the surface (cycles of h and v); on the
torus this is the ordinary FFT derivative. Spectral multipliers use the 2-D
Fourier transform on the torus and the Friedrichs eigenbasis on origamis.
"""

import threading
from typing import Callable, List, Optional, Tuple

import numpy as np

from engine.errors import BasisUnavailable
from models.field import Field, SpectralBasis
from models.surface import Direction, TranslationSurface
from utils.logger import get_logger

logger = get_logger('Grid')


def _cycles(perm) -> List[List[int]]:
    seen = [False] * len(perm)
    cycles = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cycle, i = [], start
        while not seen[i]:
            seen[i] = True
            cycle.append(i)
            i = perm[i]
        cycles.append(cycle)
    return cycles


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class Grid:
    """
    Node grid of resolution N x N per square.

    Holds the cylinder decomposition used for derivatives, the torus
    wavenumber tables and, on origamis, the Friedrichs eigenbasis once built.
    """

    def __init__(self, surface: TranslationSurface, resolution: int, dealias: bool = True):
        """
        Initialize the grid.

        Args:
            surface: Translation surface
            resolution: Nodes per square side (power of two)
            dealias: Apply the 2/3 rule to pointwise products on the torus
        """
        if not is_power_of_two(resolution) or resolution < 4:
            raise ValueError(f"resolution must be a power of two >= 4, got {resolution}")

        self.surface = surface
        self.resolution = resolution
        self.dealias_enabled = dealias
        self.h_cylinders = _cycles(surface.h_perm)
        self.v_cylinders = _cycles(surface.v_perm)

        self._lock = threading.Lock()
        self._basis: Optional[SpectralBasis] = None
        self._basis_version = 0
        self._dealias_mask: Optional[np.ndarray] = None

        logger.debug(
            f"Grid initialized: {surface.name}, N={resolution}, "
            f"{len(self.h_cylinders)} horizontal / {len(self.v_cylinders)} vertical cylinder(s)"
        )

    def __repr__(self) -> str:
        return f"Grid({self.surface.name}, N={self.resolution})"

    @property
    def node_shape(self) -> Tuple[int, int, int]:
        return self.surface.n_squares, self.resolution, self.resolution

    @property
    def weight(self) -> float:
        """Quadrature weight of a node."""
        return 1.0 / self.resolution ** 2

    @property
    def is_torus(self) -> bool:
        return self.surface.is_torus

    def nodes(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Square index and (x, y) coordinates of every node, each (S, N, N)."""
        n = self.resolution
        sq, ix, iy = np.meshgrid(np.arange(self.surface.n_squares), np.arange(n), np.arange(n), indexing='ij')
        return sq, ix / n, iy / n

    def compatible(self, other: 'Grid') -> bool:
        return other is self or (other.surface == self.surface and other.resolution == self.resolution)

    # derivatives

    def derivative(self, values: np.ndarray, axis: str, order: int = 1) -> np.ndarray:
        """
        Spectral derivative along horizontal ('x') or vertical ('y') cylinders.

        Args:
            values: Array (..., S, N, N)
            axis: 'x' or 'y'
            order: Derivative order

        Returns:
            np.ndarray of the same shape
        """
        if order == 0:
            return np.array(values, dtype=float, copy=True)
        n = self.resolution
        out = np.empty(np.shape(values), dtype=float)
        cylinders = self.h_cylinders if axis == 'x' else self.v_cylinders
        src = -1 if axis == 'x' else -2

        for cyc in cylinders:
            length = len(cyc) * n
            block = values[..., cyc, :, :]
            seq = np.moveaxis(block, src, -3)
            shape = seq.shape
            seq = seq.reshape(shape[:-2] + (length,))

            k = np.fft.rfftfreq(length, d=1.0 / n)
            mult = (2j * np.pi * k) ** order
            if order % 2 == 1:
                mult[-1] = 0.0
            seq = np.fft.irfft(np.fft.rfft(seq, axis=-1) * mult, n=length, axis=-1)
            out[..., cyc, :, :] = np.moveaxis(seq.reshape(shape), -3, src)
        return out

    def partial(self, field: Field, order_x: int = 0, order_y: int = 0) -> Field:
        """Mixed derivative X^order_x Y^order_y of a field."""
        values = field.values
        if order_x:
            values = self.derivative(values, 'x', order_x)
        if order_y:
            values = self.derivative(values, 'y', order_y)
        return Field(self, values)

    def lie_derivative(self, field: Field, d: Direction) -> Field:
        """X_xi f = xi1 X f + xi2 Y f."""
        values = d.xi[0] * self.derivative(field.values, 'x') + d.xi[1] * self.derivative(field.values, 'y')
        return Field(self, values)

    def gradient(self, field: Field) -> Field:
        """
        Jacobian of a column field: (rows, 1) -> (rows, 2), columns X f and Y f.
        """
        if field.shape[1] != 1:
            raise ValueError(f"gradient expects a column field, got shape {field.shape}")
        dx = self.derivative(field.values[:, 0], 'x')
        dy = self.derivative(field.values[:, 0], 'y')
        return Field(self, np.stack([dx, dy], axis=1))

    # torus Fourier tables

    def wavenumbers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Integer wavenumbers (kx, ky), each (N, N), in FFT order."""
        k = np.fft.fftfreq(self.resolution, d=1.0 / self.resolution)
        return np.meshgrid(k, k, indexing='ij')

    def fourier(self, values: np.ndarray) -> np.ndarray:
        """Normalized 2-D Fourier coefficients of torus values (..., 1, N, N) -> (..., N, N)."""
        self._require_torus('fourier')
        return np.fft.fft2(values[..., 0, :, :]) / self.resolution ** 2

    def from_fourier(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse of fourier(): (..., N, N) -> real values (..., 1, N, N)."""
        self._require_torus('from_fourier')
        return np.fft.ifft2(coeffs * self.resolution ** 2).real[..., None, :, :]

    def _require_torus(self, what: str) -> None:
        if not self.is_torus:
            raise ValueError(f"{what} is only defined on the torus")

    # basis

    @property
    def has_basis(self) -> bool:
        return self._basis is not None

    @property
    def basis(self) -> SpectralBasis:
        if self._basis is None:
            raise BasisUnavailable(
                f"no Friedrichs eigenbasis built for {self}; call build_basis(n_modes) first"
            )
        return self._basis

    @property
    def basis_version(self) -> int:
        """Incremented whenever the eigenbasis is replaced."""
        return self._basis_version

    def attach_basis(self, basis: SpectralBasis) -> None:
        with self._lock:
            self._basis = basis
            self._basis_version += 1

    def build_basis(self, n_modes: int) -> SpectralBasis:
        """
        Build (or reuse) the eigenbasis with at least n_modes modes.

        Args:
            n_modes: Number of eigenpairs

        Returns:
            SpectralBasis
        """
        from engine.spectral.basis import laplacian_eigenbasis

        with self._lock:
            if self._basis is not None and self._basis.n_modes >= n_modes:
                return self._basis
            self._basis = laplacian_eigenbasis(self.surface, n_modes, self.resolution)
            self._basis_version += 1
            logger.info(f"Eigenbasis of {self} built with {n_modes} modes (version {self._basis_version})")
            return self._basis

    def project(self, values: np.ndarray) -> np.ndarray:
        """Eigencoefficients <f, e_n>: (..., S, N, N) -> (..., n_modes)."""
        return np.tensordot(values, self.basis.fields, axes=([-3, -2, -1], [1, 2, 3])) * self.weight

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        """Sum of coeffs * e_n: (..., n_modes) -> (..., S, N, N)."""
        return np.tensordot(coeffs, self.basis.fields, axes=([-1], [0]))

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        """Spectral coefficients: Fourier on the torus, eigencoefficients otherwise."""
        if self.is_torus:
            return self.fourier(values)
        return self.project(values)

    # spectral multipliers

    def frequencies(self) -> np.ndarray:
        """Dyadic frequency per mode: |k| on the torus, sqrt(lambda)/(2 pi) on origamis."""
        if self.is_torus:
            kx, ky = self.wavenumbers()
            return np.hypot(kx, ky)
        return self.basis.frequencies

    def apply_multiplier(self, values: np.ndarray, profile: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """
        Apply the radial multiplier profile(frequency) to values (..., S, N, N).
        """
        mult = profile(self.frequencies())
        if self.is_torus:
            spec = np.fft.fft2(values[..., 0, :, :])
            return np.fft.ifft2(spec * mult).real[..., None, :, :]
        return self.reconstruct(self.project(values) * mult)

    def dealias(self, values: np.ndarray) -> np.ndarray:
        """2/3-rule truncation on the torus; identity on origamis or when disabled."""
        if not (self.dealias_enabled and self.is_torus):
            return values
        if self._dealias_mask is None:
            kx, ky = self.wavenumbers()
            cut = self.resolution / 3.0
            with self._lock:
                self._dealias_mask = (np.abs(kx) <= cut) & (np.abs(ky) <= cut)
        spec = np.fft.fft2(values[..., 0, :, :])
        return np.fft.ifft2(spec * self._dealias_mask).real[..., None, :, :]
