"""
sweep: fixed-point solves over a parameter grid on a bounded worker pool.
"""

from typing import Any, Dict

import numpy as np

from core.pipeline import Job, Pipeline, expand_grid
from engine.solver.fixed_point import fixed_point_solve
from models.experiment import RunContext
from utils.logger import get_logger

logger = get_logger('SweepCommand')

DEFAULTS = {
    'workers': 4,
    'grid': {},
}


class SweepCommand:
    """
    Run one fixed-point solve per grid point and tabulate the obstruction.

    Grid keys are dotted experiment keys, e.g. 'hamiltonian.epsilon' or
    'sobolev.s'. Each job re-validates the experiment with its overrides.
    """

    def __init__(self, name: str, config: Dict[str, Any]):
        self.name = name
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.category = 'builtin'

    def get_schema(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': 'Parallel parameter grid of fixed-point solves',
            'options': sorted(DEFAULTS),
            'required': ['grid'],
        }

    def execute(self, context: RunContext) -> Dict[str, Any]:
        experiment = context.experiment
        options = context.options(self.config)
        jobs = expand_grid(options.get('grid') or {})
        workers = context.workers or int(options['workers'])

        def solve(job: Job) -> Dict[str, Any]:
            local = experiment.with_overrides(job.overrides())
            problem = context.registry.problem(local)
            result = fixed_point_solve(problem.hamiltonian, problem.direction, problem.grid,
                                       local.section('solver'), problem.ce)
            return {
                'converged': result.converged,
                'iterations': result.iterations,
                'residual': result.residual,
                'contraction_factor': result.contraction_factor,
                'obstruction': result.obstruction,
                'obstruction_norm': float(np.max(np.abs(result.obstruction), initial=0.0)),
            }

        rows = Pipeline(workers).run(solve, jobs)

        names = sorted(options.get('grid') or {})
        columns = ['index'] + names + ['status', 'converged', 'iterations', 'residual', 'obstruction_norm', 'error']
        table = [
            [r['index']] + [r['params'][n] for n in names]
            + [r['status'], r.get('converged', ''), r.get('iterations', ''), r.get('residual', ''),
               r.get('obstruction_norm', ''), r.get('error', '')]
            for r in rows
        ]
        context.run_dir.write_table('sweep.csv', columns, table)
        if names:
            ok = [r for r in rows if r['status'] == 'ok']
            context.run_dir.write_plot('obstruction_norm', names[0], 'obstruction_norm',
                                       [r['params'][names[0]] for r in ok], [r['obstruction_norm'] for r in ok])

        failed = sum(r['status'] != 'ok' for r in rows)
        logger.info(f"sweep: {len(rows)} job(s), {failed} failed")
        return {
            'command': self.name,
            'experiment': experiment.to_dict(),
            'sweep': rows,
            'status': 'PASS' if failed == 0 else 'FAIL',
        }
