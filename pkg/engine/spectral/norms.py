"""
Sobolev norms on translation surfaces.

friedrichs: (sum_n (1 + lambda_n)^s |<f, e_n>|^2)^(1/2), Fourier on the torus,
            Friedrichs eigencoefficients on origamis.
weighted:   sum over alpha + beta <= s of ||X^alpha Y^beta f||_L2^2 for
            integer s; for s = k + sigma the top derivatives are measured in
            the Friedrichs H^sigma norm.
Matrix-valued fields are measured entrywise and summed in squares.
"""

import math

import numpy as np

from models.field import Field
from utils.logger import get_logger

logger = get_logger('Norms')

FLAVORS = ('weighted', 'friedrichs')


def friedrichs_norm(f: Field, s: float) -> float:
    """
    Friedrichs Sobolev norm.

    Args:
        f: Field
        s: Sobolev order (any real)

    Returns:
        float

    Raises:
        BasisUnavailable: On origamis without an eigenbasis
    """
    grid = f.grid
    if grid.is_torus:
        kx, ky = grid.wavenumbers()
        weights = (1.0 + 4.0 * np.pi ** 2 * (kx ** 2 + ky ** 2)) ** s
        coeffs = grid.fourier(f.values)
    else:
        weights = (1.0 + grid.basis.eigenvalues) ** s
        coeffs = grid.project(f.values)
    return float(np.sqrt(np.sum(weights * np.abs(coeffs) ** 2)))


def _integer_weighted_sq(f: Field, k: int) -> float:
    grid = f.grid
    total = 0.0
    for order in range(k + 1):
        for alpha in range(order + 1):
            total += grid.partial(f, alpha, order - alpha).l2_norm() ** 2
    return total


def weighted_norm(f: Field, s: float) -> float:
    """
    Weighted Sobolev norm from derivatives along the translation frame.

    Args:
        f: Field
        s: Sobolev order; negative orders fall back to the Friedrichs norm

    Returns:
        float
    """
    if s < 0:
        return friedrichs_norm(f, s)
    k = int(math.floor(s))
    sigma = s - k
    total = _integer_weighted_sq(f, k)
    if sigma > 0.0:
        grid = f.grid
        for alpha in range(k + 1):
            beta = k - alpha
            total += friedrichs_norm(grid.partial(f, alpha, beta), sigma) ** 2
            total += friedrichs_norm(grid.partial(grid.partial(f, beta, 0), 0, alpha), sigma) ** 2
    return float(np.sqrt(total))


def sobolev_norm(f: Field, s: float, flavor: str = 'friedrichs') -> float:
    """
    Sobolev norm of a field.

    Args:
        f: Field
        s: Sobolev order
        flavor: 'weighted' or 'friedrichs'

    Returns:
        Non-negative float
    """
    if flavor == 'friedrichs':
        return friedrichs_norm(f, s)
    if flavor == 'weighted':
        return weighted_norm(f, s)
    raise ValueError(f"Unknown norm flavor '{flavor}', expected one of {FLAVORS}")


def c1_norm(f: Field) -> float:
    """sup |f| + sup |X f| + sup |Y f|."""
    grid = f.grid
    return f.sup_norm() + grid.partial(f, 1, 0).sup_norm() + grid.partial(f, 0, 1).sup_norm()
