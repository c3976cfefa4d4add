"""
solve: fixed-point solve of the invariance equation, with optional Hamiltonian
correction, conjugacy check and Newton cross-check.
"""

from typing import Any, Dict

import numpy as np

from engine.dynamics.invariance import invariance_residual
from engine.solver.conjugacy import verify_conjugacy
from engine.solver.fixed_point import fixed_point_solve
from engine.solver.newton_oracle import newton_oracle
from engine.solver.obstruction import correct_hamiltonian
from models.experiment import RunContext
from utils.logger import get_logger

logger = get_logger('SolveCommand')

DEFAULTS = {
    'correct': False,
    'directions': None,
    'conjugacy': True,
    'conjugacy_tol': 1e-6,
    't_max': 10.0,
    'n_points': 8,
    'newton_check': False,
    'newton_tol': 1e-7,
}


class SolveCommand:
    """
    Solve F_xi(H, u) = 0 modulo counterterms and write the run artifacts.

    Artifacts: result.json, trace.csv, fields/w.bin, fields/residual.bin and
    plots/{residual,increment,contraction}.csv.
    """

    def __init__(self, name: str, config: Dict[str, Any]):
        self.name = name
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.category = 'builtin'

    def get_schema(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': 'Fixed-point solve with conjugacy check',
            'options': sorted(DEFAULTS),
            'required': [],
        }

    def execute(self, context: RunContext) -> Dict[str, Any]:
        """
        Args:
            context: Run context

        Returns:
            dict: result.json payload
        """
        experiment = context.experiment
        options = context.options(self.config)
        problem = context.registry.problem(experiment)
        solver_config = experiment.section('solver')
        grid, d = problem.grid, problem.direction
        H = problem.hamiltonian
        run_dir = context.run_dir

        correction = None
        if options['correct']:
            correction = correct_hamiltonian(H, d, grid, options['directions'], solver_config, problem.ce,
                                             experiment.section('cohomology'))
            H = correction.hamiltonian
            result = correction.result
        else:
            result = fixed_point_solve(H, d, grid, solver_config, problem.ce)

        u = result.embedding
        tolerances = {
            'residual_tol': float(solver_config.get('residual_tol', 1e-9)),
            'obstruction_tol': float(solver_config.get('obstruction_tol', 1e-10)),
            'conjugacy_tol': float(options['conjugacy_tol']),
            'newton_tol': float(options['newton_tol']),
        }
        payload: Dict[str, Any] = {
            'command': self.name,
            'experiment': experiment.to_dict(),
            'hamiltonian': H.to_dict(),
            'solve': result.to_dict(),
            'displacement_ratio': u.check_displacement(),
            'tolerances': tolerances,
            'conjugacy_deviation': None,
            'newton_distance': None,
        }
        if correction is not None:
            payload['correction'] = {
                'directions': list(correction.directions),
                'coefficients': correction.coefficients,
                'jacobian': correction.jacobian,
                'steps': correction.steps,
            }

        if options['conjugacy']:
            if result.converged:
                payload['conjugacy_deviation'] = verify_conjugacy(
                    H, u, float(options['t_max']), int(options['n_points']), context.rng(),
                    experiment.section('conjugacy'),
                )
            else:
                logger.warning("Solve did not converge; conjugacy check skipped")

        if options['newton_check']:
            if grid.is_torus:
                phase = u.w1.mean()[:, 0]
                oracle = newton_oracle(H, grid, d, phase, experiment.section('newton'))
                payload['newton_distance'] = u.distance_to(oracle.embedding)
                payload['newton_multiplier'] = oracle.multiplier
            else:
                logger.warning("Newton cross-check runs on the torus only; skipped")

        passed = result.converged
        if payload['conjugacy_deviation'] is not None:
            passed = passed and payload['conjugacy_deviation'] <= tolerances['conjugacy_tol']
        if payload['newton_distance'] is not None:
            passed = passed and payload['newton_distance'] <= tolerances['newton_tol']
        payload['status'] = 'PASS' if passed else 'FAIL'

        run_dir.write_trace(result.history)
        run_dir.write_field('w', u.w)
        run_dir.write_field('residual', invariance_residual(H, u))
        iterations = [r.iteration for r in result.history]
        run_dir.write_plot('residual', 'iter', 'residual', iterations, [r.residual for r in result.history])
        run_dir.write_plot('increment', 'iter', 'increment', iterations, [r.increment for r in result.history])
        run_dir.write_plot('contraction', 'iter', 'contraction_factor', iterations,
                           [r.contraction_factor for r in result.history])
        if result.obstruction.size:
            run_dir.write_plot('obstruction', 'component', 'value',
                               list(range(result.obstruction.size)), np.ravel(result.obstruction))

        logger.info(
            f"solve: {payload['status']} (residual {result.residual:.3e}, "
            f"{result.iterations} iteration(s), |P| {np.max(np.abs(result.obstruction), initial=0.0):.3e})"
        )
        return payload
