"""
Fixed-point solve of F_xi(H, u) = 0 modulo counterterms.

One step at the displacement w = u - u_0:

    rhs   = F_xi(H, u) - L_para w - B M^-1 w
    (v,c) = para-cohomological solve of rhs
    w    <- -v

At a fixed point F_xi(H, u) = B M^-1 w + T_M(sum_i P_i chi_i), with P the final
counterterms; F vanishes exactly when P does.

Iteration modes:
    plain        para-operators assembled once at the starting embedding,
                 F and B re-evaluated at every iterate
    accelerated  para-operators rebuilt at every iterate
"""

from typing import Any, Callable, Dict, List, Optional

import numpy as np

from engine.cohomology.solver import CohomologySolver
from engine.dynamics.embedding import Embedding
from engine.dynamics.hamiltonian import Hamiltonian
from engine.dynamics.invariance import invariance_residual
from engine.dynamics.linearization import LinAlgebra, linearization
from engine.errors import ConfigError, NoConvergence, SmallnessGateFailed
from engine.solver.para_cohomological import ParaCohomSystem
from engine.spectral.grid import Grid
from engine.spectral.norms import c1_norm, friedrichs_norm
from models.field import Field
from models.results import IterationRecord, SolveResult
from models.surface import Direction
from utils.logger import get_logger

logger = get_logger('FixedPoint')

DEFAULTS = {
    's': 2.0,
    't': 1.0,
    'residual_tol': 1e-9,
    'increment_tol': 1e-10,
    'obstruction_tol': 1e-10,
    'max_iter': 200,
    'gate_iteration': 3,
    'gate_factor': 0.5,
    'rho1': 0.5,
    'rho2': 0.5,
    'iteration': 'plain',
}

ITERATION_MODES = ('plain', 'accelerated')


def contraction_probe(H: Hamiltonian, u: Embedding, t: float = 1.0, lin: Optional[LinAlgebra] = None) -> float:
    """
    Measured factor ||B M^-1 (u - u_0)||_{H^t} / ||F_xi(H, u)||_{H^t}.

    Both norms vanish at H_0, u_0; 0/0 is reported as 0.
    """
    lin = lin or linearization(H, u)
    bw = lin.apply_B(u, lin.M_inv.matmul(u.w))
    num = friedrichs_norm(bw, t)
    den = friedrichs_norm(lin.F, t)
    if num == 0.0:
        return 0.0
    if den == 0.0:
        return float('inf')
    return num / den


def _merge(config: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    cfg = dict(DEFAULTS)
    cfg.update(config or {})
    return cfg


class FixedPointSolver:
    """
    Picard iteration on the displacement, with para-operators frozen at the
    starting embedding (plain) or rebuilt at every iterate (accelerated).
    """

    def __init__(self, H: Hamiltonian, grid: Grid, direction: Direction,
                 config: Optional[Dict[str, Any]] = None, ce: Optional[CohomologySolver] = None):
        """
        Initialize the solver.

        Args:
            H: Hamiltonian
            grid: Grid of H's surface
            direction: Direction xi
            config: 'solver' config section
            ce: Shared cohomological solver (keeps its SVD cache across solves)
        """
        self.H = H
        self.grid = grid
        self.direction = direction
        self.config = _merge(config)
        self.ce = ce or CohomologySolver(grid, direction, self.config.get('cohomology'))
        if self.config['iteration'] not in ITERATION_MODES:
            raise ConfigError(f"solver.iteration must be one of {ITERATION_MODES}, got {self.config['iteration']!r}")
        self._frozen: Optional[ParaCohomSystem] = None
        self.on_iteration: Optional[Callable[[IterationRecord], None]] = None

    def _check_gate(self, f0: Field) -> None:
        norm = c1_norm(f0)
        if norm > self.config['rho1']:
            logger.error(f"Smallness gate: |F(H, u_0)|_C1 = {norm:.3e} > rho1 = {self.config['rho1']}")
            raise SmallnessGateFailed(
                f"|F_xi(H, u_0)|_C1 = {norm:.3e} exceeds rho1 = {self.config['rho1']}"
            )

    def system_at(self, lin: LinAlgebra) -> ParaCohomSystem:
        """Para-operators for a step at lin: the frozen ones in plain mode."""
        if self.config['iteration'] == 'accelerated':
            return ParaCohomSystem.build(lin, self.ce, self.config)
        if self._frozen is None:
            self._frozen = ParaCohomSystem.build(lin, self.ce, self.config)
        return self._frozen

    def step(self, u: Embedding, lin: LinAlgebra):
        """
        One application of the fixed-point map.

        Returns:
            (w_new, counterterms, dual_fields, system)
        """
        system = self.system_at(lin)
        w = u.w
        rhs = lin.F - system.operator(w) - lin.apply_B(u, lin.M_inv.matmul(w))
        v, c, duals = system.solve(rhs)
        return -v, c, duals, system

    def solve(self, u_init: Optional[Embedding] = None) -> SolveResult:
        """
        Iterate until the increment falls below its tolerance.

        Returns:
            SolveResult

        Raises:
            SmallnessGateFailed: Gate on F(u_0), on the iterates or on the contraction factor
            NoConvergence: max_iter reached
        """
        cfg = self.config
        grid = self.grid
        t = cfg['t']
        u = u_init or Embedding.trivial(grid, self.direction)
        self._frozen = None
        self._check_gate(invariance_residual(self.H, Embedding.trivial(grid, self.direction)))

        history: List[IterationRecord] = []
        counterterms = np.zeros((0, 4, 1))
        duals = ()
        factor = 0.0
        stationary = False
        last = None

        for iteration in range(1, int(cfg['max_iter']) + 1):
            lin = linearization(self.H, u)
            factor = contraction_probe(self.H, u, t, lin)
            w_new, counterterms, duals, system = self.step(u, lin)
            last = (u, lin, system, w_new)
            increment = friedrichs_norm(w_new - u.w, t)

            previous = history[-1].increment if history else 0.0
            ratio = increment / previous if previous > 0.0 else float('nan')
            record = IterationRecord(iteration=iteration, residual=lin.F.l2_norm(), increment=increment,
                                     contraction_factor=factor, increment_ratio=ratio)
            history.append(record)
            logger.info(
                f"Iteration {iteration}: residual {record.residual:.3e}, "
                f"increment {increment:.3e} (ratio {ratio:.3g}), contraction {factor:.3e}"
            )
            if self.on_iteration:
                self.on_iteration(record)

            if iteration == cfg['gate_iteration'] and not factor < cfg['gate_factor']:
                raise SmallnessGateFailed(
                    f"contraction factor {factor:.3e} at iteration {iteration} is not below {cfg['gate_factor']}"
                )
            w_c1 = c1_norm(w_new)
            if w_c1 > cfg['rho2']:
                raise SmallnessGateFailed(f"|u - u_0|_C1 = {w_c1:.3e} exceeds rho2 = {cfg['rho2']}")

            u = Embedding(w_new, self.direction)
            if increment <= cfg['increment_tol']:
                stationary = True
                break

        if not stationary:
            logger.error(f"Fixed-point iteration did not settle in {cfg['max_iter']} iterations")
            raise NoConvergence(
                f"fixed-point increment {history[-1].increment:.3e} above {cfg['increment_tol']:.1e} "
                f"after {cfg['max_iter']} iterations"
            )

        lin = linearization(self.H, u)
        residual = lin.F.l2_norm()
        obstruction = counterterms[:, :, 0].ravel() if counterterms.size else np.zeros(0)
        p_norm = float(np.max(np.abs(obstruction))) if obstruction.size else 0.0

        # identity at the last linearization point, with the operators of that step
        u_k, lin_k, system, w_k1 = last
        predicted = lin_k.apply_B(u_k, lin_k.M_inv.matmul(u_k.w)) + system.Tm(system.counterterm_field(counterterms, duals))
        identity_residual = (lin_k.F - predicted).l2_norm()
        back_substitution = system.back_substitution_residual(-w_k1, counterterms, duals, system.rhs)
        converged = residual <= cfg['residual_tol'] and p_norm <= cfg['obstruction_tol']

        logger.info(
            f"Fixed point after {len(history)} iteration(s): residual {residual:.3e}, |P| {p_norm:.3e}, "
            f"identity residual {identity_residual:.3e} (para-CE residual {back_substitution:.3e}), "
            f"converged={converged}"
        )
        return SolveResult(
            embedding=u,
            history=history,
            obstruction=obstruction,
            converged=converged,
            stationary=stationary,
            contraction_factor=factor,
            residual=residual,
            identity_residual=identity_residual,
            lagrangian_defect=lin.L.l2_norm(),
            counterterms=counterterms,
            back_substitution_residual=back_substitution,
            iteration_mode=cfg['iteration'],
        )


def fixed_point_solve(H: Hamiltonian, d: Direction, grid: Grid, config: Optional[Dict[str, Any]] = None,
                      ce: Optional[CohomologySolver] = None) -> SolveResult:
    """
    Solve for an invariant embedding of H in direction d.

    Args:
        H: Hamiltonian
        d: Direction xi
        grid: Grid
        config: 'solver' config section
        ce: Optional shared cohomological solver

    Returns:
        SolveResult
    """
    return FixedPointSolver(H, grid, d, config, ce).solve()
