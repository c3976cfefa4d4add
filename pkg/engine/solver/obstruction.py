"""
Obstruction map P[u(H)] and Hamiltonian correction onto its zero locus.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from engine.cohomology.solver import CohomologySolver
from engine.dynamics.hamiltonian import Hamiltonian, HamiltonianTerm
from engine.errors import NoConvergence, RankDeficient
from engine.solver.fixed_point import fixed_point_solve
from engine.spectral.grid import Grid
from models.field import Field
from models.results import SolveResult
from models.surface import Direction
from utils.logger import get_logger

logger = get_logger('Obstruction')

DEFAULT_DIRECTIONS = ('fiber_poly(1,0)', 'fiber_poly(0,1)')

CORRECTION_DEFAULTS = {
    'fd_step': 1e-4,
    'rank_tol': 1e-6,
    'max_newton': 10,
    'obstruction_tol': 1e-10,
    'range_rtol': 0.1,
    'max_wavenumber': 2,
}


def _candidate_bases(max_wavenumber: int) -> List[Tuple[str, int, int]]:
    bases = []
    for m in range(0, max_wavenumber + 1):
        for n in range(-max_wavenumber, max_wavenumber + 1):
            if m == 0 and n < 0:
                continue
            bases.append(('cos_base', m, n))
            if m or n:
                bases.append(('sin_base', m, n))
    return bases


def default_directions(H: Hamiltonian, ce: CohomologySolver, s: float = 2.0,
                       max_wavenumber: int = 2) -> List[str]:
    """
    Correction directions matched to the invariant distributions.

    On the torus the mean is the only distribution and the fiber monomials
    fiber_poly(1,0), fiber_poly(0,1) suffice. On origamis every detected
    distribution D_i gets the trigonometric base term g (masked like H) that
    maximizes |D_i(g)| / ||g||_L2, paired with both fiber monomials: 2h
    directions for the 4h obstruction components.

    Args:
        H: Hamiltonian (its mask radius is used for the candidates)
        ce: Cohomological solver of the problem
        s: Sobolev order of the distributions
        max_wavenumber: Largest |m|, |n| among the candidate base terms

    Returns:
        list of term expressions
    """
    grid = ce.grid
    if grid.is_torus:
        return list(DEFAULT_DIRECTIONS)

    sq, x, y = grid.nodes()
    if H.mask_radius > 0.0:
        masked = Hamiltonian(H.surface, (HamiltonianTerm(1.0, 'fiber_poly(1,0)'),), H.mask_radius)
        mask = masked.value(sq, x, y, 1.0, 0.0) - 0.5
    else:
        mask = np.ones(x.shape)

    bases = _candidate_bases(max_wavenumber)
    scores = []
    for kind, m, n in bases:
        phase = 2.0 * np.pi * (m * x + n * y)
        g = Field(grid, (mask * (np.cos(phase) if kind == 'cos_base' else np.sin(phase)))[None, None])
        norm = g.l2_norm()
        values = np.ravel(ce.distribution_values(g, s)) if norm > 0.0 else np.zeros(0)
        scores.append(np.abs(values) / norm if norm > 0.0 else values)
    scores = np.array(scores)

    chosen: List[int] = []
    for i in range(scores.shape[1]):
        order = [j for j in np.argsort(-scores[:, i], kind='stable') if j not in chosen]
        if not order:
            logger.warning(f"Only {len(bases)} candidate base terms for {scores.shape[1]} distributions")
            break
        chosen.append(int(order[0]))

    directions = []
    for j in chosen:
        kind, m, n = bases[j]
        directions.append(f"{kind}({m},{n})*fiber_poly(1,0)")
        directions.append(f"{kind}({m},{n})*fiber_poly(0,1)")
    logger.info(f"Correction directions from {scores.shape[1]} distribution(s): {directions}")
    return directions


def obstruction_map(H: Hamiltonian, d: Direction, grid: Grid, config: Optional[Dict[str, Any]] = None,
                    ce: Optional[CohomologySolver] = None) -> np.ndarray:
    """
    Final counterterms of the fixed-point solve: 4 reals per invariant distribution.

    Args:
        H: Hamiltonian
        d: Direction
        grid: Grid
        config: 'solver' config section
        ce: Optional shared cohomological solver

    Returns:
        np.ndarray P
    """
    return fixed_point_solve(H, d, grid, config, ce).obstruction


@dataclass(frozen=True, eq=False)
class Correction:
    """
    Result of correct_hamiltonian.

    Attributes:
        hamiltonian: Corrected Hamiltonian H + sum_i d_i h_i
        coefficients: d_i
        directions: Expressions h_i
        jacobian: Finite-difference Jacobian dP/dd at d = 0
        obstruction: P at the corrected Hamiltonian
        result: Fixed-point solve at the corrected Hamiltonian
        steps: Newton steps taken
    """
    hamiltonian: Hamiltonian
    coefficients: np.ndarray
    directions: Sequence[str]
    jacobian: np.ndarray
    obstruction: np.ndarray
    result: SolveResult
    steps: int


class HamiltonianCorrector:
    """Gauss-Newton on the coefficients of finitely many correction terms."""

    def __init__(self, H: Hamiltonian, d: Direction, grid: Grid, directions: Optional[Sequence[str]] = None,
                 config: Optional[Dict[str, Any]] = None, ce: Optional[CohomologySolver] = None,
                 cohomology: Optional[Dict[str, Any]] = None):
        """
        Args:
            H: Hamiltonian to correct
            d: Direction
            grid: Grid
            directions: Term expressions h_i (default: matched to the invariant distributions)
            config: 'solver' config section (with an optional 'correction' subsection)
            ce: Shared cohomological solver
            cohomology: 'cohomology' config section, used when ce is not given
        """
        self.H = H
        self.direction = d
        self.grid = grid
        self.solver_config = dict(config or {})
        self.config = dict(CORRECTION_DEFAULTS)
        self.config.update(self.solver_config.get('correction', {}) or {})
        if 'obstruction_tol' in self.solver_config:
            self.config['obstruction_tol'] = self.solver_config['obstruction_tol']
        self.ce = ce or CohomologySolver(grid, d, cohomology or self.solver_config.get('cohomology'))
        if directions:
            self.directions = list(directions)
        else:
            self.directions = default_directions(H, self.ce, float(self.solver_config.get('s', 2.0)),
                                                 int(self.config['max_wavenumber']))

    def corrected(self, coefficients: np.ndarray) -> Hamiltonian:
        terms = [HamiltonianTerm(float(c), expr) for c, expr in zip(coefficients, self.directions) if c != 0.0]
        return self.H.with_terms(terms)

    def solve_at(self, coefficients: np.ndarray) -> SolveResult:
        return fixed_point_solve(self.corrected(coefficients), self.direction, self.grid, self.solver_config, self.ce)

    def jacobian(self, coefficients: np.ndarray) -> np.ndarray:
        """Central-difference Jacobian of P with respect to the coefficients."""
        step = self.config['fd_step']
        columns = []
        for i in range(len(self.directions)):
            e = np.zeros(len(self.directions))
            e[i] = step
            p_plus = self.solve_at(coefficients + e).obstruction
            p_minus = self.solve_at(coefficients - e).obstruction
            columns.append((p_plus - p_minus) / (2.0 * step))
        return np.array(columns).T

    def run(self) -> Correction:
        """
        Raises:
            RankDeficient: The directions do not span the obstruction range
            NoConvergence: |P| above tolerance after max_newton steps
        """
        n = len(self.directions)
        coeffs = np.zeros(n)
        result = self.solve_at(coeffs)
        p = result.obstruction
        tol = self.config['obstruction_tol']
        if np.max(np.abs(p), initial=0.0) <= tol:
            logger.info("Obstruction already below tolerance; no correction needed")
            return Correction(self.H, coeffs, self.directions, np.zeros((p.size, n)), p, result, 0)

        jac = self.jacobian(coeffs)
        sigma = scipy.linalg.svdvals(jac) if jac.size else np.zeros(0)
        if sigma.size < n or sigma.min() < self.config['rank_tol']:
            logger.error(f"Correction Jacobian is rank deficient: singular values {sigma}")
            raise RankDeficient(
                f"correction directions {self.directions} do not span the obstruction range "
                f"(singular values {np.array2string(sigma, precision=3)}, tolerance {self.config['rank_tol']:.1e})"
            )

        steps = 0
        for steps in range(1, int(self.config['max_newton']) + 1):
            delta, *_ = scipy.linalg.lstsq(jac, -p)
            miss = float(np.linalg.norm(jac @ delta + p))
            if miss > max(tol, self.config['range_rtol'] * float(np.linalg.norm(p))):
                logger.error(f"Obstruction {p} is outside the range of the correction Jacobian (miss {miss:.3e})")
                raise RankDeficient(
                    f"correction directions {self.directions} cannot reach P = 0: the best step leaves "
                    f"|J delta + P| = {miss:.3e} of |P| = {np.linalg.norm(p):.3e}"
                )
            coeffs = coeffs + delta
            result = self.solve_at(coeffs)
            p = result.obstruction
            logger.info(f"Correction step {steps}: coefficients {coeffs}, |P| {np.max(np.abs(p)):.3e}")
            if np.max(np.abs(p)) <= tol:
                break
        else:
            raise NoConvergence(
                f"Hamiltonian correction left |P| = {np.max(np.abs(p)):.3e} > {tol:.1e} "
                f"after {self.config['max_newton']} steps"
            )

        return Correction(self.corrected(coeffs), coeffs, self.directions, jac, p, result, steps)


def correct_hamiltonian(H: Hamiltonian, d: Direction, grid: Grid, directions: Optional[Sequence[str]] = None,
                        config: Optional[Dict[str, Any]] = None,
                        ce: Optional[CohomologySolver] = None,
                        cohomology: Optional[Dict[str, Any]] = None) -> Correction:
    """
    Move H onto the zero locus of the obstruction map along the given directions.

    Args:
        H: Hamiltonian
        d: Direction
        grid: Grid
        directions: Term expressions h_i (default: see default_directions)
        config: 'solver' config section (with an optional 'correction' subsection)
        ce: Optional shared cohomological solver
        cohomology: 'cohomology' config section, used when ce is not given

    Returns:
        Correction

    Raises:
        RankDeficient: The directions do not span, or cannot reach, the obstruction
        NoConvergence: |P| above tolerance after max_newton steps
    """
    return HamiltonianCorrector(H, d, grid, directions, config, ce, cohomology).run()
