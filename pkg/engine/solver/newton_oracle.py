"""
Direct Newton solve of F_xi(H, u) + (0, lambda) = 0 on the torus.

Independent of the para-product machinery: each Newton step solves

    A dw - X_xi dw + (0, dlambda) = -(F + (0, lambda)),   mean(dw1) = phase - mean(w1)

with GMRES, right-preconditioned by the exact inverse of the flat operator at
the trivial section (Fourier division).
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from engine.cohomology.solver import CohomologySolver
from engine.dynamics.embedding import J, Embedding
from engine.dynamics.hamiltonian import Hamiltonian
from engine.dynamics.invariance import composed_hessian, invariance_residual
from engine.errors import NoConvergence
from engine.spectral.grid import Grid
from models.field import Field
from models.surface import Direction
from utils.logger import get_logger

logger = get_logger('NewtonOracle')

DEFAULTS = {
    'tol': 1e-12,
    'max_newton': 20,
    'gmres_rtol': 1e-13,
    'gmres_restart': 60,
    'gmres_maxiter': 200,
}


@dataclass(frozen=True, eq=False)
class NewtonResult:
    """Oracle solution: embedding, fiber multiplier lambda and the residual trace."""
    embedding: Embedding
    multiplier: np.ndarray
    residual: float
    iterations: int


class NewtonOracle:
    """Newton-GMRES solver used to cross-check the fixed-point solve."""

    def __init__(self, H: Hamiltonian, grid: Grid, d: Direction, config: Optional[Dict[str, Any]] = None):
        if not grid.is_torus:
            raise ValueError("the Newton oracle is implemented on the torus only")
        self.H = H
        self.grid = grid
        self.direction = d
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.ce = CohomologySolver(grid, d)
        self._size = 4 * grid.resolution ** 2

    # flat vector <-> (dw, dlambda)

    def _split(self, z: np.ndarray):
        n = self.grid.resolution
        dw = Field(self.grid, z[:self._size].reshape(4, 1, 1, n, n))
        return dw, z[self._size:self._size + 2]

    def _join(self, field: Field, extra: np.ndarray) -> np.ndarray:
        return np.concatenate([field.values.ravel(), np.asarray(extra, dtype=float).ravel()])

    def _flat_inverse(self, r: np.ndarray) -> np.ndarray:
        """Exact inverse of the linearization at (H_0, u_0) with the phase row."""
        res, q = self._split(r)
        r1, r2 = res.rows(0, 2), res.rows(2, 4)
        mean2 = r2.mean()[:, :, None, None, None]
        mean1 = r1.mean()[:, :, None, None, None]
        dlam = r2.mean()[:, 0]

        dw2 = -self.ce.solve_ce(r2 - mean2).u + mean1
        dw1 = self.ce.solve_ce(dw2 - r1).u + q[:, None, None, None, None]
        return self._join(Field.stack([dw1, dw2]), dlam)

    def _jacobian(self, a: Field):
        grid = self.grid
        d = self.direction

        def apply(z: np.ndarray) -> np.ndarray:
            dw, dlam = self._split(z)
            out = a.matmul(dw) - grid.lie_derivative(dw, d)
            shift = np.zeros((4, 1))
            shift[2:, 0] = dlam
            out = out + shift[:, :, None, None, None]
            return self._join(out, dw.rows(0, 2).mean()[:, 0])

        return apply

    def solve(self, phase: Optional[np.ndarray] = None, u_init: Optional[Embedding] = None) -> NewtonResult:
        """
        Args:
            phase: Prescribed mean of w1 (default 0)
            u_init: Starting embedding (default u_0)

        Returns:
            NewtonResult

        Raises:
            NoConvergence: Newton or GMRES failure
        """
        cfg = self.config
        grid = self.grid
        phase = np.zeros(2) if phase is None else np.asarray(phase, dtype=float)
        u = u_init or Embedding.trivial(grid, self.direction)
        lam = np.zeros(2)
        size = self._size + 2
        precond = LinearOperator((size, size), matvec=self._flat_inverse, dtype=float)

        for iteration in range(1, int(cfg['max_newton']) + 1):
            shift = np.zeros((4, 1))
            shift[2:, 0] = lam
            res = invariance_residual(self.H, u) + shift[:, :, None, None, None]
            phase_defect = u.w1.mean()[:, 0] - phase
            norm = float(np.sqrt(res.l2_norm() ** 2 + np.sum(phase_defect ** 2)))
            logger.debug(f"Newton {iteration}: residual {norm:.3e}")
            if norm <= cfg['tol']:
                return NewtonResult(u, lam, norm, iteration - 1)

            a = Field.constant(grid, J).matmul(composed_hessian(self.H, u))
            jac = self._jacobian(a)
            op = LinearOperator((size, size), matvec=lambda y: jac(precond.matvec(y)), dtype=float)
            rhs = -self._join(res, phase_defect)
            y, info = gmres(op, rhs, rtol=cfg['gmres_rtol'], atol=0.0,
                            restart=cfg['gmres_restart'], maxiter=cfg['gmres_maxiter'])
            if info < 0:
                raise NoConvergence(f"GMRES breakdown in Newton step {iteration} (info={info})")
            dw, dlam = self._split(precond.matvec(y))
            u = u.displaced(dw)
            lam = lam + dlam
            if dw.l2_norm() <= 1e-3 * cfg['tol']:
                # stagnated at round-off
                return NewtonResult(u, lam, norm, iteration)

        raise NoConvergence(f"Newton oracle did not reach {cfg['tol']:.1e} in {cfg['max_newton']} steps")


def newton_oracle(H: Hamiltonian, grid: Grid, d: Direction, phase: Optional[np.ndarray] = None,
                  config: Optional[Dict[str, Any]] = None) -> NewtonResult:
    """Solve F_xi(H, u) + (0, lambda) = 0 directly (torus only)."""
    return NewtonOracle(H, grid, d, config).solve(phase)
