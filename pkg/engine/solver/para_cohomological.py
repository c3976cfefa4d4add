"""
Para-cohomological equation with counterterms.

    T_M ( [[0, T_S], [0, 0]] v_hat - X_xi v_hat + sum_i c_i chi_i ) = f,
    v_hat = T_{M^-1} v

The system is triangular after applying T_M^-1: the fiber block is a plain
cohomological equation, the base block picks up T_S v_hat_2.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from engine.cohomology.solver import CohomologySolver
from engine.dynamics.embedding import Embedding
from engine.dynamics.hamiltonian import Hamiltonian
from engine.dynamics.linearization import LinAlgebra, linearization
from engine.errors import ContractionRegimeViolated
from engine.spectral.paraproduct import ParaproductOperator
from models.field import Field
from models.results import CohomSolution
from utils.logger import get_logger

logger = get_logger('ParaCohomological')

DEFAULTS = {
    's': 2.0,
    'contraction_bound': 0.5,
    'inverse_tol': 1e-12,
    'inverse_max_terms': 60,
    'vanishing_order': 0,
}

# M at the trivial section
M0 = np.diag([1.0, 1.0, -1.0, -1.0])


@dataclass(eq=False)
class ParaCohomSystem:
    """
    Para-product operators of the linearized equation at one embedding.

    Attributes:
        Tm: T_{M[u]} (completed)
        Tm_inv: T_{M[u]^-1} (completed)
        Ts: T_{S[u]} (completed)
        ce: Cohomological solver in the direction of u
        lin: Pointwise linearization at u
        rhs: Right-hand side of the last solve
    """
    Tm: ParaproductOperator
    Tm_inv: ParaproductOperator
    Ts: ParaproductOperator
    ce: CohomologySolver
    lin: LinAlgebra
    rhs: Optional[Field] = None
    config: Optional[Dict[str, Any]] = None

    @classmethod
    def build(cls, lin: LinAlgebra, ce: CohomologySolver, config: Optional[Dict[str, Any]] = None) -> 'ParaCohomSystem':
        """
        Assemble the para-products after checking the contraction regime.

        Raises:
            ContractionRegimeViolated: M[u] too far from diag(I, -I)
        """
        cfg = dict(DEFAULTS)
        cfg.update(config or {})
        distance = float(np.max(np.abs(lin.M.values - M0[:, :, None, None, None])))
        if distance > cfg['contraction_bound']:
            logger.error(f"M[u] is {distance:.3e} away from diag(I, -I)")
            raise ContractionRegimeViolated(
                f"sup |M[u] - diag(I, -I)| = {distance:.3e} exceeds {cfg['contraction_bound']}; "
                f"para-product inverses are not guaranteed to contract"
            )
        return cls(
            Tm=ParaproductOperator(lin.M, completed=True),
            Tm_inv=ParaproductOperator(lin.M_inv, completed=True),
            Ts=ParaproductOperator(lin.S, completed=True),
            ce=ce,
            lin=lin,
            config=cfg,
        )

    def _ce(self, g: Field) -> CohomSolution:
        s = self.config['s']
        grid = g.grid
        if grid.surface.cone_points:
            return self.ce.solve_ce_vanishing(g, self.config['vanishing_order'], s)
        return self.ce.solve_ce(g, s)

    def inverse_m(self, f: Field) -> Field:
        return self.Tm.inverse(f, self.config['inverse_tol'], self.config['inverse_max_terms'])

    def inverse_m_inv(self, f: Field) -> Field:
        return self.Tm_inv.inverse(f, self.config['inverse_tol'], self.config['inverse_max_terms'])

    def operator(self, w: Field) -> Field:
        """L_para w = T_M [[0, T_S], [0, 0]] T_{M^-1} w - T_M X_xi T_{M^-1} w."""
        grid = w.grid
        w_hat = self.Tm_inv(w)
        twisted = Field.stack([self.Ts(w_hat.rows(2, 4)), Field.zeros(grid, (2, 1))])
        drift = grid.lie_derivative(w_hat, self.ce.direction)
        return self.Tm(twisted - drift)

    def counterterm_field(self, c: np.ndarray, dual_fields) -> Field:
        """sum_i c_i chi_i for c of shape (count, 4, 1)."""
        grid = self.lin.M.grid
        values = np.zeros((4, 1) + grid.node_shape)
        for ci, chi in zip(c, dual_fields):
            values = values + ci[:, :, None, None, None] * chi.values[0, 0]
        return Field(grid, values)

    def solve(self, f: Field) -> Tuple[Field, np.ndarray, Tuple[Field, ...]]:
        """
        Solve for (v, c).

        Args:
            f: Right-hand side (4x1)

        Returns:
            (v, c, dual_fields): v (4x1), c (count, 4, 1), chi_i
        """
        self.rhs = f
        g = self.inverse_m(f)

        fiber = self._ce(g.rows(2, 4))
        v2 = -fiber.u
        base = self._ce(g.rows(0, 2) - self.Ts(v2))
        v1 = -base.u

        v_hat = Field.stack([v1, v2])
        v = self.inverse_m_inv(v_hat)
        c = np.concatenate([base.counterterms, fiber.counterterms], axis=1)
        return v, c, base.dual_fields

    def back_substitution_residual(self, v: Field, c: np.ndarray, dual_fields, f: Field) -> float:
        """||L_para v + T_M(sum c_i chi_i) - f||_L2 (f dealiased like the para-products)."""
        grid = f.grid
        target = Field(grid, grid.dealias(f.values))
        return (self.operator(v) + self.Tm(self.counterterm_field(c, dual_fields)) - target).l2_norm()


def solve_para_cohomological(H: Hamiltonian, u: Embedding, f: Field, ce: CohomologySolver,
                             config: Optional[Dict[str, Any]] = None,
                             lin: Optional[LinAlgebra] = None) -> Tuple[Field, np.ndarray]:
    """
    Solve the para-cohomological equation with counterterms at u.

    Args:
        H: Hamiltonian
        u: Embedding
        f: Right-hand side (4x1)
        ce: Cohomological solver for u's direction
        config: Solver options (s, contraction_bound, inverse_tol, ...)
        lin: Precomputed linearization at u

    Returns:
        (v, c): v (4x1) and counterterms (count, 4, 1)

    Raises:
        ContractionRegimeViolated, NoConvergence, SmallDivisor
    """
    lin = lin or linearization(H, u)
    system = ParaCohomSystem.build(lin, ce, config)
    v, c, _ = system.solve(f)
    logger.debug(f"Para-cohomological solve: |v|_L2 = {v.l2_norm():.3e}, |c| = {np.max(np.abs(c)) if c.size else 0.0:.3e}")
    return v, c
