"""
The invariance functional F_xi(H, u) = X_H o u - X_xi u.
"""

from engine.dynamics.embedding import Embedding
from engine.dynamics.hamiltonian import Hamiltonian, hamiltonian_field
from models.field import Field


def composed_field(H: Hamiltonian, u: Embedding) -> Field:
    """X_H evaluated along the embedding, as a 4x1 field."""
    values = hamiltonian_field(H, u.points())
    return Field(u.grid, values[:, None])


def composed_hessian(H: Hamiltonian, u: Embedding) -> Field:
    """Hessian of H along the embedding, as a 4x4 field."""
    return Field(u.grid, H.hessian(*u.points()))


def invariance_residual(H: Hamiltonian, u: Embedding) -> Field:
    """
    F_xi(H, u) on the grid.

    Args:
        H: Hamiltonian
        u: Embedding

    Returns:
        Field (4x1): (dH/dp(u) - xi - X_xi w1, -grad_x H(u) - X_xi w2)
    """
    return composed_field(H, u) - u.drift()


def residual_norm(H: Hamiltonian, u: Embedding) -> float:
    return invariance_residual(H, u).l2_norm()


def zero_displacement_residual(H: Hamiltonian, u: Embedding) -> Field:
    """F_xi(H, u_0) for the trivial section with u's direction."""
    return invariance_residual(H, Embedding.trivial(u.grid, u.direction))

