"""
Littlewood-Paley blocks and para-product operators.

Conventions:
    psi(t) = 1 for t <= 1.1, 0 for t >= 1.9, quintic smoothstep in log2(t)
    S_j f = psi(|k| / 2^j) f,  J = log2(N) - 1
    Delta_0 = S_0,  Delta_j = S_j - S_{j-1},  Delta_J = f - S_{J-1} f
    T_a f = sum_{j >= 2} (S_{j-2} a)(Delta_j f)

The completed product adds (S_0 a)(S_1 f), so that a constant symbol acts as
exact multiplication; para-product inverses are taken for the completed form.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from engine.errors import NoConvergence, ShapeMismatch
from engine.spectral.grid import Grid
from engine.spectral.norms import friedrichs_norm
from models.field import Field
from utils.logger import get_logger

logger = get_logger('Paraproduct')

PSI_LOW = 1.1
PSI_HIGH = 1.9


def smoothstep5(s: np.ndarray) -> np.ndarray:
    """Quintic smoothstep on [0, 1], clamped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def cutoff_profile(t: np.ndarray) -> np.ndarray:
    """Radial low-pass profile psi(t)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide='ignore'):
        log_t = np.log2(np.maximum(t, 1e-300))
    s = (log_t - np.log2(PSI_LOW)) / (np.log2(PSI_HIGH) - np.log2(PSI_LOW))
    return 1.0 - smoothstep5(s)


def dyadic_levels(grid: Grid) -> int:
    """Top dyadic index J = log2(N) - 1."""
    return int(np.log2(grid.resolution)) - 1


class _Bands:
    """Low-pass partial sums S_j of one array, transforming it only once."""

    def __init__(self, grid: Grid, values: np.ndarray):
        self.grid = grid
        self.values = values
        self.freq = grid.frequencies()
        if grid.is_torus:
            self._spec = np.fft.fft2(values[..., 0, :, :])
        else:
            self._spec = grid.project(values)
        self._cache = {}

    def lowpass(self, j: int) -> np.ndarray:
        if j not in self._cache:
            mult = cutoff_profile(self.freq / 2.0 ** j)
            if self.grid.is_torus:
                self._cache[j] = np.fft.ifft2(self._spec * mult).real[..., None, :, :]
            else:
                self._cache[j] = self.grid.reconstruct(self._spec * mult)
        return self._cache[j]

    def block(self, j: int, top: int) -> np.ndarray:
        if j == 0:
            return self.lowpass(0)
        if j >= top:
            return self.values - self.lowpass(top - 1)
        return self.lowpass(j) - self.lowpass(j - 1)


@dataclass(frozen=True, eq=False)
class DyadicDecomposition:
    """
    Littlewood-Paley decomposition of a field.

    Attributes:
        blocks: Delta_j f for j = 0..J
        partial_sums: S_j f for j = 0..J-1
    """
    blocks: Tuple[Field, ...]
    partial_sums: Tuple[Field, ...]

    @property
    def levels(self) -> int:
        return len(self.blocks) - 1

    def total(self) -> Field:
        out = self.blocks[0]
        for b in self.blocks[1:]:
            out = out + b
        return out


def decompose(f: Field) -> DyadicDecomposition:
    """
    Dyadic blocks of a field.

    Args:
        f: Field

    Returns:
        DyadicDecomposition with sum of blocks equal to f
    """
    grid = f.grid
    top = dyadic_levels(grid)
    bands = _Bands(grid, f.values)
    blocks = tuple(Field(grid, bands.block(j, top)) for j in range(top + 1))
    sums = tuple(Field(grid, bands.lowpass(j)) for j in range(top))
    return DyadicDecomposition(blocks=blocks, partial_sums=sums)


def lowpass(f: Field, j: int) -> Field:
    """S_j f."""
    return Field(f.grid, _Bands(f.grid, f.values).lowpass(j))


def symbol_product(a_values: np.ndarray, f_values: np.ndarray) -> np.ndarray:
    """
    Pointwise action of a symbol on a field.

    A (p, q) symbol acts on a (q, r) field by matrix product; a 1x1 symbol
    acts entrywise.

    Raises:
        ShapeMismatch: Incompatible shapes
    """
    p, q = a_values.shape[:2]
    if (p, q) == (1, 1):
        return a_values * f_values
    if f_values.shape[0] != q:
        raise ShapeMismatch(f"symbol of shape {(p, q)} cannot act on a field of shape {f_values.shape[:2]}")
    return np.einsum('pq...,qr...->pr...', a_values, f_values)


class ParaproductOperator:
    """
    The operator f -> T_a f for a fixed symbol a.

    The low-pass bands of the symbol are computed once, so repeated
    applications (Neumann series, solver sweeps) only transform f.
    """

    def __init__(self, a: Field, completed: bool = False):
        """
        Initialize the operator.

        Args:
            a: Symbol (1x1 or matrix)
            completed: Add the low block (S_0 a)(S_1 f)
        """
        self.symbol = a
        self.completed = completed
        self.grid = a.grid
        self.top = dyadic_levels(self.grid)
        bands = _Bands(self.grid, a.values)
        self._symbol_bands = [bands.lowpass(j) for j in range(max(self.top - 1, 1))]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.symbol.shape

    def __call__(self, f: Field) -> Field:
        """
        Apply T_a.

        Raises:
            ShapeMismatch: If the symbol cannot act on f
        """
        grid = self.grid
        f_bands = _Bands(grid, f.values)
        out = None
        for j in range(2, self.top + 1):
            term = symbol_product(self._symbol_bands[j - 2], f_bands.block(j, self.top))
            out = term if out is None else out + term
        if self.completed:
            term = symbol_product(self._symbol_bands[0], f_bands.lowpass(1))
            out = term if out is None else out + term
        if out is None:
            out = symbol_product(np.zeros_like(self.symbol.values), f.values)
        return Field(grid, grid.dealias(out))

    def inverse(self, g: Field, tol: float = 1e-10, max_terms: int = 50) -> Field:
        """
        Solve T_a v = g by the preconditioned Neumann series
        v <- v + a0^-1 (g - T_a v), with a0 the mean symbol.

        Args:
            g: Right-hand side
            tol: L2 tolerance on T_a v - g (g dealiased on the torus)
            max_terms: Maximal number of series terms

        Returns:
            Field v

        Raises:
            NoConvergence: Singular mean symbol, growing residual, or max_terms exceeded
        """
        p, q = self.shape
        if p != q:
            raise ShapeMismatch(f"para-product inverse needs a square symbol, got {self.shape}")
        if not self.completed:
            raise ValueError("para-product inverses are defined for the completed product")
        grid = self.grid
        a0 = self.symbol.mean()
        cond = np.linalg.cond(a0)
        if not np.isfinite(cond) or cond > 1e12:
            raise NoConvergence(f"mean symbol is singular (cond {cond:.2e}); the series cannot contract")
        a0_inv = np.linalg.inv(a0)[:, :, None, None, None]

        target = Field(grid, grid.dealias(g.values))
        v = Field.zeros(grid, g.shape)
        residual = target
        r_norm = residual.l2_norm()
        r_initial = r_norm
        stalled = 0

        for term in range(1, max_terms + 1):
            if r_norm <= tol:
                break
            v = v + Field(grid, symbol_product(a0_inv, residual.values))
            residual = target - self(v)
            new_norm = residual.l2_norm()
            stalled = stalled + 1 if new_norm >= r_norm else 0
            r_norm = new_norm
            if stalled >= 3 or r_norm > 10.0 * max(r_initial, tol):
                raise NoConvergence(
                    f"Neumann series for the para-product inverse is not contracting "
                    f"(residual {r_norm:.3e} after {term} terms)"
                )

        if r_norm > tol:
            raise NoConvergence(f"para-product inverse: residual {r_norm:.3e} > {tol:.1e} after {max_terms} terms")
        logger.debug(f"Para-product inverse converged, residual {r_norm:.3e}")
        return v


def paraproduct(a: Field, f: Field, completed: bool = False) -> Field:
    """
    Bony para-product T_a f (entrywise action for 1x1 symbols, matrix action otherwise).

    Args:
        a: Symbol
        f: Field
        completed: Add the low block (S_0 a)(S_1 f)

    Returns:
        Field T_a f (dealiased on the torus)
    """
    return ParaproductOperator(a, completed)(f)


def paraproduct_inverse(a: Field, g: Field, tol: float = 1e-10, max_terms: int = 50,
                        completed: bool = True) -> Field:
    """
    Field v with ||T_a v - g||_L2 <= tol for the completed para-product.

    The Bony product annihilates S_1 v, so it has no inverse; only the
    completed form is accepted.

    Args:
        a: Square symbol close to its mean
        g: Right-hand side
        tol: L2 tolerance
        max_terms: Maximal number of Neumann terms
        completed: Must be True

    Returns:
        Field v

    Raises:
        ValueError: completed is False
        NoConvergence: Neumann series does not converge
    """
    if not completed:
        logger.error("Inverse requested for the Bony para-product")
        raise ValueError("the Bony para-product drops S_1 f and has no inverse; use the completed product")
    return ParaproductOperator(a, completed=True).inverse(g, tol, max_terms)


@dataclass(frozen=True, eq=False)
class CompositionProbe:
    """
    (T_ab - T_a T_b) applied to dyadic test functions cos(2 pi 2^j x).

    Attributes:
        frequencies: Test frequencies 2^j
        ratios: ||R phi_j||_L2 / ||phi_j||_{H^-r}
        remainders: R phi_j as fields
        r: Smoothing order used in the ratio
    """
    frequencies: np.ndarray
    ratios: np.ndarray
    remainders: Tuple[Field, ...]
    r: float

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if len(self.ratios) else 0.0


def composition_remainder(a: Field, b: Field, r: float = 1.0, levels: Optional[Sequence[int]] = None) -> CompositionProbe:
    """
    Measure the composition remainder T_ab - T_a T_b.

    Args:
        a: Symbol (p, q) or 1x1
        b: Symbol (q, r) or 1x1
        r: Smoothing order for the reported ratios
        levels: Dyadic levels j of the test functions (default 2..J)

    Returns:
        CompositionProbe

    Raises:
        ShapeMismatch: Incompatible symbol shapes
    """
    grid = a.grid
    if a.shape != (1, 1) and b.shape != (1, 1) and a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot compose symbols of shapes {a.shape} and {b.shape}")
    if a.shape == (1, 1) or b.shape == (1, 1):
        ab_values = a.values * b.values
    else:
        ab_values = symbol_product(a.values, b.values)
    ab = Field(grid, grid.dealias(ab_values))
    width = b.shape[1] if b.shape != (1, 1) else (a.shape[1] if a.shape != (1, 1) else 1)

    if levels is None:
        levels = range(2, dyadic_levels(grid) + 1)
    freqs, ratios, remainders = [], [], []
    for j in levels:
        k = 2 ** j
        phi = Field.from_function(grid, lambda x, y, sq: np.cos(2.0 * np.pi * k * x))
        phi = Field(grid, np.repeat(phi.values, width, axis=0))
        rem = paraproduct(ab, phi) - paraproduct(a, paraproduct(b, phi))
        freqs.append(k)
        ratios.append(rem.l2_norm() / friedrichs_norm(phi, -r))
        remainders.append(rem)

    logger.debug(f"Composition remainder ratios: {np.array2string(np.array(ratios), precision=3)}")
    return CompositionProbe(np.array(freqs, dtype=float), np.array(ratios), tuple(remainders), r)


@dataclass(frozen=True)
class LocalNonlinearity:
    """
    A map F(x, u) evaluated pointwise, with its fiber derivative dF/du.

    Both callables take (u_values, x, y, square) arrays.
    """
    value: Callable
    du: Callable
    expression: str = ''

    @classmethod
    def from_expression(cls, expression: str) -> 'LocalNonlinearity':
        """
        Build from a sympy expression in u, x, y (e.g. 'u**2/2', 'sin(2*pi*x)*u').
        """
        u, x, y = sp.symbols('u x y')
        expr = sp.sympify(expression, locals={'u': u, 'x': x, 'y': y})
        value = sp.lambdify((u, x, y), expr, 'numpy')
        du = sp.lambdify((u, x, y), sp.diff(expr, u), 'numpy')
        return cls(
            value=lambda uu, xx, yy, sq: np.broadcast_to(value(uu, xx, yy), np.shape(uu)),
            du=lambda uu, xx, yy, sq: np.broadcast_to(du(uu, xx, yy), np.shape(uu)),
            expression=expression,
        )


def para_linearize(F: LocalNonlinearity, u: Field) -> Tuple[Field, Field]:
    """
    Para-linearization F(x, u) - F(x, 0) = T_{dF/du(x, u)} u + R u.

    Args:
        F: Local nonlinearity
        u: Scalar field

    Returns:
        (symbol, remainder): dF/du(x, u(x)) and R u
    """
    grid = u.grid
    sq, x, y = grid.nodes()
    uv = u.values
    symbol = Field(grid, F.du(uv, x, y, sq))
    remainder = Field(grid, F.value(uv, x, y, sq) - F.value(np.zeros_like(uv), x, y, sq)) - paraproduct(symbol, u)
    return symbol, remainder
