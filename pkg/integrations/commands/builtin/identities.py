"""
check-identities: run the linearization and symplectic identity suites.
"""

from typing import Any, Dict

from engine.dynamics.hamiltonian import HamiltonianTerm
from engine.dynamics.identities import run_identity_suites
from models.experiment import RunContext
from utils.logger import get_logger

logger = get_logger('IdentitiesCommand')

DEFAULTS = {
    'perturbation': 1e-3,
    'perturbation_expr': 'cos_base(1,-1)*fiber_poly(1,0)',
}


class CheckIdentitiesCommand:
    """Measured identity residuals against their tolerances, one row per suite."""

    def __init__(self, name: str, config: Dict[str, Any]):
        self.name = name
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.category = 'builtin'

    def get_schema(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': 'Identity suites on random band-limited data',
            'options': sorted(DEFAULTS),
            'required': [],
        }

    def execute(self, context: RunContext) -> Dict[str, Any]:
        experiment = context.experiment
        options = context.options(self.config)
        problem = context.registry.problem(experiment)
        H = problem.hamiltonian
        if H.is_flat and options.get('perturbation'):
            # identities are only informative away from H_0
            H = H.with_terms([HamiltonianTerm(float(options['perturbation']), str(options['perturbation_expr']))])
            logger.info(f"Flat Hamiltonian in config; checking identities at H_0 + {H.perturbation}")

        rows = run_identity_suites(H, problem.grid, problem.direction, context.rng(), experiment.section('identities'))
        context.run_dir.write_table('identities.csv', ('suite', 'measured', 'tolerance', 'status'),
                                    [(r.suite, r.measured, r.tolerance, r.status) for r in rows])
        passed = all(r.passed for r in rows)
        return {
            'command': self.name,
            'experiment': experiment.to_dict(),
            'hamiltonian': H.to_dict(),
            'identities': [r.to_dict() for r in rows],
            'status': 'PASS' if passed else 'FAIL',
        }
