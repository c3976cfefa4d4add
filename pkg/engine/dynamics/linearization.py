"""
Linearization algebra of the invariance functional.

    A   = J Hess H(u)                       (4x4)
    N   = (Du^T Du)^-1                      (2x2)
    M   = [Du | J Du N]                     (4x4)
    L   = Du^T J Du                         (2x2, Lagrangian defect)
    S   = (I + (N L)^2)^-1 N Du^T [A, J] Du N
    E   = D F_xi(H, u)                      (4x2)
    B v = E v1 + B2 v2,
    B2  = [A, J] Du N + J E N - J Du X_xi(N) - Du S

With these, D_u F (M v) = M [[0, S], [0, 0]] v - M X_xi v + B v.
"""

from dataclasses import dataclass

import numpy as np

from engine.dynamics.embedding import J, Embedding
from engine.dynamics.hamiltonian import Hamiltonian
from engine.dynamics.invariance import composed_hessian, invariance_residual
from engine.errors import IllConditioned
from models.field import Field
from utils.logger import get_logger

logger = get_logger('Linearization')

DEFAULT_COND_BOUND = 1e6


def _pointwise(values: np.ndarray) -> np.ndarray:
    """(p, q, ...) -> (..., p, q)."""
    return np.moveaxis(np.moveaxis(values, 0, -1), 0, -1)


def _fieldwise(values: np.ndarray) -> np.ndarray:
    """(..., p, q) -> (p, q, ...)."""
    return np.moveaxis(np.moveaxis(values, -1, 0), -1, 0)


def pointwise_inverse(f: Field) -> Field:
    return Field(f.grid, _fieldwise(np.linalg.inv(_pointwise(f.values))))


def pointwise_cond(f: Field) -> float:
    """Largest condition number of f over the nodes."""
    return float(np.max(np.linalg.cond(_pointwise(f.values))))


def commutator(a: Field, b: Field) -> Field:
    return a.matmul(b) - b.matmul(a)


@dataclass(frozen=True, eq=False)
class LinAlgebra:
    """
    Pointwise matrices of the linearization at an embedding.

    Attributes:
        A: J Hess H(u)
        N: (Du^T Du)^-1
        M: [Du | J Du N]
        M_inv: M^-1
        L: Du^T J Du
        S: Twist of the transport equation
        Du: Jacobian of u
        E: Jacobian of F_xi(H, u)
        F: F_xi(H, u)
    """
    A: Field
    N: Field
    M: Field
    M_inv: Field
    L: Field
    S: Field
    Du: Field
    E: Field
    F: Field

    @property
    def J(self) -> Field:
        return Field.constant(self.A.grid, J)

    def B2(self, u: Embedding) -> Field:
        """Second block column of B[u, L, E] (4x2)."""
        grid = self.A.grid
        j = self.J
        x_n = grid.lie_derivative(self.N, u.direction)
        return (commutator(self.A, j).matmul(self.Du).matmul(self.N)
                + j.matmul(self.E).matmul(self.N)
                - j.matmul(self.Du).matmul(x_n)
                - self.Du.matmul(self.S))

    def apply_B(self, u: Embedding, v: Field) -> Field:
        """B v = E v1 + B2 v2 for a 4x1 field v."""
        return self.E.matmul(v.rows(0, 2)) + self.B2(u).matmul(v.rows(2, 4))

    def twist(self, v: Field) -> Field:
        """M [[0, S], [0, 0]] v = Du S v2."""
        return self.Du.matmul(self.S.matmul(v.rows(2, 4)))


def linearization(H: Hamiltonian, u: Embedding, cond_bound: float = DEFAULT_COND_BOUND) -> LinAlgebra:
    """
    Assemble A, N, M, M^-1, L, S (and Du, E, F) at an embedding.

    Args:
        H: Hamiltonian
        u: Embedding
        cond_bound: Largest allowed condition number of Du^T Du

    Returns:
        LinAlgebra

    Raises:
        IllConditioned: Du^T Du near-singular somewhere
    """
    grid = u.grid
    j = Field.constant(grid, J)
    du = u.jacobian()

    gram = du.transpose().matmul(du)
    cond = pointwise_cond(gram)
    if not np.isfinite(cond) or cond > cond_bound:
        logger.error(f"Du^T Du is ill-conditioned (cond {cond:.3e} > {cond_bound:.1e})")
        raise IllConditioned(f"Du^T Du has condition number {cond:.3e} above the bound {cond_bound:.1e}")

    n = pointwise_inverse(gram)
    a = j.matmul(composed_hessian(H, u))
    m = Field(grid, np.concatenate([du.values, j.matmul(du).matmul(n).values], axis=1))
    m_inv = pointwise_inverse(m)
    lag = du.transpose().matmul(j).matmul(du)

    nl = n.matmul(lag)
    eye = Field.constant(grid, np.eye(2))
    twist = pointwise_inverse(eye + nl.matmul(nl))
    s = twist.matmul(n).matmul(du.transpose()).matmul(commutator(a, j)).matmul(du).matmul(n)

    f = invariance_residual(H, u)
    e = grid.gradient(f)
    logger.debug(f"Linearization assembled: cond(Du^T Du) <= {cond:.3e}, |L|_sup = {lag.sup_norm():.3e}")
    return LinAlgebra(A=a, N=n, M=m, M_inv=m_inv, L=lag, S=s, Du=du, E=e, F=f)
