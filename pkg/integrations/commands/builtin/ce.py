"""
ce: a single cohomological solve X_xi u + sum_i c_i chi_i = f, plus the
measured a priori constant.
"""

from typing import Any, Dict

import numpy as np
import sympy as sp

from engine.dynamics.hamiltonian import VARIABLES, parse_term
from models.experiment import RunContext
from models.field import Field
from utils.logger import get_logger

logger = get_logger('CohomologyCommand')

DEFAULTS = {
    'expr': 'cos_base(1,-1)',
    'samples': 50,
    'residual_tol': 1e-10,
    'sup_residual_tol': 1e-8,
    'vanishing_order': None,
}


def field_from_expression(grid, expression: str) -> Field:
    """Sample a term expression at the nodes (in-square coordinates, p = 0)."""
    fn = sp.lambdify(VARIABLES, parse_term(expression), 'numpy')
    return Field.from_function(grid, lambda x, y, sq: fn(x, y, np.zeros_like(x), np.zeros_like(x)))


class CohomologyCommand:
    """Solve one cohomological equation and measure the a priori constant."""

    def __init__(self, name: str, config: Dict[str, Any]):
        self.name = name
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.category = 'builtin'

    def get_schema(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': 'Single cohomological solve with counterterms',
            'options': sorted(DEFAULTS),
            'required': ['expr'],
        }

    def execute(self, context: RunContext) -> Dict[str, Any]:
        experiment = context.experiment
        options = context.options(self.config)
        problem = context.registry.problem(experiment)
        grid, d, ce = problem.grid, problem.direction, problem.ce
        s, t = experiment.s, experiment.t

        f = field_from_expression(grid, str(options['expr']))
        order = options.get('vanishing_order')
        if order is not None and grid.surface.cone_points:
            solution = ce.solve_ce_vanishing(f, int(order), s)
        else:
            solution = ce.solve_ce(f, s, t)

        equation = grid.lie_derivative(solution.u, d) + solution.counterterm_field() - f
        residual = equation.l2_norm()
        sup_residual = equation.sup_norm()
        constant = None
        if int(options['samples']) > 0:
            constant = ce.apriori_probe(s, t, int(options['samples']), experiment.seed)

        run_dir = context.run_dir
        run_dir.write_field('f', f)
        run_dir.write_field('u', solution.u)
        nodes = np.arange(grid.resolution) / grid.resolution
        run_dir.write_plot('u_bottom_row', 'x', 'u', nodes, solution.u.values[0, 0, 0, :, 0])

        passed = residual <= float(options['residual_tol']) and sup_residual <= float(options['sup_residual_tol'])
        logger.info(f"ce: residual {residual:.3e}, sup residual {sup_residual:.3e}, "
                    f"{len(solution.dual_fields)} counterterm(s)")
        return {
            'command': self.name,
            'experiment': experiment.to_dict(),
            'ce': {
                'expr': str(options['expr']),
                's': s,
                't': t,
                'residual': residual,
                'sup_residual': sup_residual,
                'counterterms': solution.counterterms[:, 0, 0],
                'count': len(solution.dual_fields),
                'vanishing_order': order,
                'vanishing_defect': solution.vanishing_defect,
                'apriori_constant': constant,
                'solution_norm': solution.norm,
            },
            'tolerances': {
                'residual_tol': float(options['residual_tol']),
                'sup_residual_tol': float(options['sup_residual_tol']),
            },
            'status': 'PASS' if passed else 'FAIL',
        }
