"""
Result data models for ParaSurf solvers.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from models.field import Field


@dataclass(frozen=True, eq=False)
class DistributionBasis:
    """
    Numerically invariant distributions of X_xi at Sobolev order s.

    D_i(f) = <vectors[:, i], W_s c_f>, with c_f the eigencoefficients of f and
    W_s = diag((1 + lambda_n)^(s/2)).

    Attributes:
        vectors: Left singular vectors of the weighted Lie derivative, (n_modes, count)
        singular_values: Near-null singular values, one per distribution
        spectrum: All singular values, descending
        s: Sobolev order used for the weighting
        weights: Diagonal of W_s
        dual_fields: Fields chi_i with D_i(chi_j) = delta_ij
        gap_ratio: Smallest kept over largest rejected singular value (inf if nothing is rejected)
        threshold: Singular-value threshold used
    """
    vectors: np.ndarray
    singular_values: np.ndarray
    spectrum: np.ndarray
    s: float
    weights: np.ndarray
    dual_fields: Tuple[Field, ...]
    gap_ratio: float
    threshold: float

    @property
    def count(self) -> int:
        return self.vectors.shape[1]

    @property
    def order_tags(self) -> Tuple[float, ...]:
        return tuple(float(self.s) for _ in range(self.count))

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """
        Evaluate all distributions on eigencoefficients (..., n_modes).

        Returns:
            np.ndarray of shape (count, ...)
        """
        n = self.vectors.shape[0]
        weighted = coeffs[..., :n] * self.weights
        return np.moveaxis(weighted @ self.vectors, -1, 0)


@dataclass(frozen=True, eq=False)
class CohomSolution:
    """
    Solution of X_xi u + sum_i c_i chi_i = f.

    Attributes:
        u: Zero-average solution field
        counterterms: c_i per distribution and entry, shape (count, rows, cols)
        dual_fields: chi_i (scalar fields)
        residual: ||X_xi u + sum_i c_i chi_i - f||_L2 on the grid
        vanishing_defect: max |d^j u| at cone nodes (vanishing solves only)
        norm: ||u||_{H^t} when a solution order t was requested
        vanishing_values: Vanishing conditions d^j u(node) evaluated on the unconstrained
            solution, (conditions, rows, cols) (vanishing solves only)
    """
    u: Field
    counterterms: np.ndarray
    dual_fields: Tuple[Field, ...]
    residual: float
    vanishing_defect: Optional[float] = None
    norm: Optional[float] = None
    vanishing_values: Optional[np.ndarray] = None

    def counterterm_field(self) -> Field:
        """sum_i c_i chi_i as a field of the shape of u."""
        grid = self.u.grid
        values = np.zeros(self.u.values.shape)
        for c, chi in zip(self.counterterms, self.dual_fields):
            values = values + c[:, :, None, None, None] * chi.values[0, 0]
        return Field(grid, values)


@dataclass(frozen=True)
class IterationRecord:
    """One row of the fixed-point trace; increment_ratio is increment over the previous one."""
    iteration: int
    residual: float
    increment: float
    contraction_factor: float
    increment_ratio: float = float('nan')


@dataclass(eq=False)
class SolveResult:
    """
    Outcome of the fixed-point solve.

    Attributes:
        embedding: Final embedding u
        history: Iteration trace
        obstruction: P, 4 reals per invariant distribution
        converged: residual <= tol and |P| <= obstruction_tol
        stationary: Increment fell below its tolerance
        contraction_factor: Last measured contraction factor
        residual: Final ||F_xi(H, u)||_L2
        identity_residual: ||F - Op(B M^-1) w - T_M(sum P_i chi_i)||_L2 at the last
            linearization point, with the para-operators of that step
        back_substitution_residual: Para-cohomological residual of the last step; bounds
            the identity residual up to the last increment
        iteration_mode: 'plain' or 'accelerated'
        lagrangian_defect: ||L[u]||_L2 at the end
        counterterms: Final counterterm array (count, 4, 1)
    """
    embedding: Any
    history: List[IterationRecord]
    obstruction: np.ndarray
    converged: bool
    stationary: bool
    contraction_factor: float
    residual: float
    identity_residual: float = 0.0
    lagrangian_defect: float = 0.0
    counterterms: Optional[np.ndarray] = None
    back_substitution_residual: float = 0.0
    iteration_mode: str = 'plain'
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.history)

    def to_dict(self) -> Dict[str, Any]:
        """Deterministic summary for result.json."""
        return {
            'converged': bool(self.converged),
            'stationary': bool(self.stationary),
            'iterations': self.iterations,
            'residual': float(self.residual),
            'contraction_factor': float(self.contraction_factor),
            'obstruction': [float(p) for p in np.ravel(self.obstruction)],
            'identity_residual': float(self.identity_residual),
            'lagrangian_defect': float(self.lagrangian_defect),
            'back_substitution_residual': float(self.back_substitution_residual),
            'iteration_mode': self.iteration_mode,
            **self.extras,
        }
