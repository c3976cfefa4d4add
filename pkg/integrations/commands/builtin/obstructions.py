"""
obstructions: invariant-distribution counts h(s) over a list of Sobolev orders.
"""

from typing import Any, Dict, List

import numpy as np

from models.experiment import RunContext
from utils.logger import get_logger

logger = get_logger('ObstructionsCommand')

DEFAULTS = {
    'orders': [1.0, 2.0, 3.0],
    'n_candidates': None,
}


class ObstructionsCommand:
    """
    Count invariant distributions per order and record the singular values.

    Writes obstructions.csv with columns (s, count, gap_ratio, sigma_0, ...)
    and plots/counts.csv.
    """

    def __init__(self, name: str, config: Dict[str, Any]):
        self.name = name
        self.config = dict(DEFAULTS)
        self.config.update(config or {})
        self.category = 'builtin'

    def get_schema(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': 'Invariant-distribution count sweep over s',
            'options': sorted(DEFAULTS),
            'required': ['orders'],
        }

    def execute(self, context: RunContext) -> Dict[str, Any]:
        experiment = context.experiment
        options = context.options(self.config)
        problem = context.registry.problem(experiment)
        orders = [float(s) for s in options['orders']]
        n_candidates = options.get('n_candidates')

        rows: List[Dict[str, Any]] = []
        for s in orders:
            dist = problem.ce.invariant_distributions(s, n_candidates)
            rows.append({
                's': s,
                'count': dist.count,
                'gap_ratio': dist.gap_ratio,
                'threshold': dist.threshold,
                'singular_values': dist.singular_values,
            })
            logger.info(f"h({s}) = {dist.count} (gap ratio {dist.gap_ratio:.3g})")

        counts = [r['count'] for r in rows]
        non_decreasing = all(a <= b for a, b in zip(counts, counts[1:]))
        width = max((len(r['singular_values']) for r in rows), default=0)
        columns = ['s', 'count', 'gap_ratio'] + [f'sigma_{i}' for i in range(width)]
        table = []
        for r in rows:
            sigma = list(np.ravel(r['singular_values']))
            table.append([r['s'], r['count'], r['gap_ratio']] + sigma + [''] * (width - len(sigma)))
        context.run_dir.write_table('obstructions.csv', columns, table)
        context.run_dir.write_plot('counts', 's', 'count', orders, counts)

        return {
            'command': self.name,
            'experiment': experiment.to_dict(),
            'obstructions': rows,
            'non_decreasing': non_decreasing,
            'status': 'PASS' if non_decreasing and counts and counts[0] >= 1 else 'FAIL',
        }
