"""
Numerical checks of the linearization identities.

Each suite returns an IdentityCheck row (measured value against tolerance);
run_identity_suites collects them for the check-identities command.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from engine.dynamics.embedding import J, Embedding
from engine.dynamics.hamiltonian import Hamiltonian, hamiltonian_field
from engine.dynamics.invariance import invariance_residual
from engine.dynamics.linearization import _pointwise, linearization
from engine.spectral.grid import Grid
from models.field import Field
from models.surface import Direction
from utils.logger import get_logger

logger = get_logger('Identities')

DEFAULT_TOLERANCES = {
    'trivial_section': 1e-14,
    'symplectic': 1e-12,
    'energy': 1e-12,
    'linearization_identity': 1e-5,
    'lagrangian_identity': 1e-8,
    'lagrangian_mean': 1e-10,
    'm_inverse': 1e-10,
}


@dataclass(frozen=True)
class IdentityCheck:
    """One row of an identity suite."""
    suite: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)

    @property
    def status(self) -> str:
        return 'pass' if self.passed else 'FAIL'

    def to_dict(self) -> Dict[str, Any]:
        return {'suite': self.suite, 'measured': float(self.measured),
                'tolerance': float(self.tolerance), 'status': self.status}


def check_linearization_identity(H: Hamiltonian, u: Embedding, v: Field, h: float = 1e-5) -> float:
    """
    Relative error of D_u F(M v) = M [[0, S], [0, 0]] v - M X_xi v + B v.

    Args:
        H: Hamiltonian
        u: Embedding
        v: 4x1 field
        h: Central-difference step in [1e-6, 1e-4]

    Returns:
        ||LHS - RHS|| / ||RHS|| (the absolute difference when RHS vanishes)
    """
    if not 1e-6 <= h <= 1e-4:
        raise ValueError(f"finite-difference step must lie in [1e-6, 1e-4], got {h}")
    grid = u.grid
    lin = linearization(H, u)
    mv = lin.M.matmul(v)
    lhs = (invariance_residual(H, u.displaced(h * mv)) - invariance_residual(H, u.displaced(-h * mv))) * (0.5 / h)
    rhs = lin.twist(v) - lin.M.matmul(grid.lie_derivative(v, u.direction)) + lin.apply_B(u, v)

    diff = (lhs - rhs).l2_norm()
    scale = rhs.l2_norm()
    if scale == 0.0:
        return diff
    return diff / scale


def lagrangian_identity_residual(H: Hamiltonian, u: Embedding) -> float:
    """
    sup |X_xi L[u] + E^T J Du + Du^T J E|.
    """
    grid = u.grid
    lin = linearization(H, u)
    j = Field.constant(grid, J)
    lhs = grid.lie_derivative(lin.L, u.direction)
    rhs = -(lin.E.transpose().matmul(j).matmul(lin.Du) + lin.Du.transpose().matmul(j).matmul(lin.E))
    return (lhs - rhs).sup_norm()


def trivial_section_error(H: Hamiltonian, grid: Grid, d: Direction) -> float:
    """
    Largest deviation of A, L, S, M at u_0 from their closed forms
    [[0, I], [0, 0]], 0, -I, diag(I, -I).

    The closed forms belong to the flat part of H; the perturbation is dropped.
    """
    lin = linearization(Hamiltonian.flat(H.surface), Embedding.trivial(grid, d))
    zero, eye = np.zeros((2, 2)), np.eye(2)
    expected = {
        'A': np.block([[zero, eye], [zero, zero]]),
        'L': zero,
        'S': -eye,
        'M': np.block([[eye, zero], [zero, -eye]]),
    }
    worst = 0.0
    for name, target in expected.items():
        values = getattr(lin, name).values
        err = float(np.max(np.abs(values - target[:, :, None, None, None])))
        logger.debug(f"u_0 closed form {name}: max error {err:.3e}")
        worst = max(worst, err)
    return worst


def symplectic_defect(H: Hamiltonian, u: Embedding, n_points: int, rng: np.random.Generator) -> float:
    """max |A^T J + J A| over randomly sampled nodes."""
    lin = linearization(H, u)
    a = _pointwise(lin.A.values).reshape(-1, 4, 4)
    idx = rng.integers(0, a.shape[0], size=n_points)
    sample = a[idx]
    defect = np.swapaxes(sample, -1, -2) @ J + J @ sample
    return float(np.max(np.abs(defect)))


def energy_defect(H: Hamiltonian, n_points: int, rng: np.random.Generator, momentum: float = 2.0) -> float:
    """max |dH(X_H)| at random points of the bundle."""
    surface = H.surface
    sq = rng.integers(0, surface.n_squares, size=n_points)
    x, y = rng.random(n_points), rng.random(n_points)
    p1, p2 = rng.uniform(-momentum, momentum, size=(2, n_points))
    grad = H.gradient(sq, x, y, p1, p2)
    field = hamiltonian_field(H, (sq, x, y, p1, p2))
    return float(np.max(np.abs(np.sum(grad * field, axis=0))))


def m_inverse_defect(H: Hamiltonian, u: Embedding) -> float:
    lin = linearization(H, u)
    prod = lin.M.matmul(lin.M_inv).values
    return float(np.max(np.abs(prod - np.eye(4)[:, :, None, None, None])))


def lagrangian_mean(H: Hamiltonian, u: Embedding) -> float:
    return float(np.max(np.abs(linearization(H, u).L.mean())))


def run_identity_suites(H: Hamiltonian, grid: Grid, d: Direction, rng: np.random.Generator,
                        config: Optional[Dict[str, Any]] = None) -> List[IdentityCheck]:
    """
    Run every identity suite on random band-limited data.

    Args:
        H: Hamiltonian
        grid: Grid
        d: Direction
        rng: Seeded generator
        config: 'identities' section (n_samples, n_points, amplitude, fd_step, tolerances)

    Returns:
        list of IdentityCheck rows
    """
    config = config or {}
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(config.get('tolerances', {}) or {})
    n_samples = int(config.get('n_samples', 20))
    n_points = int(config.get('n_points', 1000))
    amplitude = float(config.get('amplitude', 0.01))
    step = float(config.get('fd_step', 1e-5))

    rows = [
        IdentityCheck('trivial_section', trivial_section_error(H, grid, d), tolerances['trivial_section']),
        IdentityCheck('energy', energy_defect(H, n_points, rng), tolerances['energy']),
    ]

    linear, symplectic, lagrangian, lag_mean, m_inv = 0.0, 0.0, 0.0, 0.0, 0.0
    for i in range(n_samples):
        u = Embedding.random(grid, d, amplitude, rng)
        v = Embedding.random(grid, d, 1.0, rng).w
        linear = max(linear, check_linearization_identity(H, u, v, step))
        symplectic = max(symplectic, symplectic_defect(H, u, n_points, rng))
        lagrangian = max(lagrangian, lagrangian_identity_residual(H, u))
        lag_mean = max(lag_mean, lagrangian_mean(H, u))
        m_inv = max(m_inv, m_inverse_defect(H, u))
        logger.debug(f"Identity sample {i + 1}/{n_samples}: linearization rel. error {linear:.3e}")

    rows.extend([
        IdentityCheck('symplectic', symplectic, tolerances['symplectic']),
        IdentityCheck('linearization_identity', linear, tolerances['linearization_identity']),
        IdentityCheck('lagrangian_identity', lagrangian, tolerances['lagrangian_identity']),
        IdentityCheck('lagrangian_mean', lag_mean, tolerances['lagrangian_mean']),
        IdentityCheck('m_inverse', m_inv, tolerances['m_inverse']),
    ])
    for row in rows:
        logger.info(f"Identity {row.suite}: {row.measured:.3e} (tol {row.tolerance:.1e}) {row.status}")
    return rows
