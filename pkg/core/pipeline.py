"""
Sweep pipeline for ParaSurf.

Expands a parameter grid into independent jobs and runs them on a bounded
worker pool. Results are merged by job key in submission order, so the
output does not depend on completion order or worker count.
"""

import itertools
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from engine.errors import ConfigError, ParaSurfError
from utils.logger import get_logger

logger = get_logger('Pipeline')


@dataclass(frozen=True)
class Job:
    """One point of a parameter grid."""
    index: int
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def key(self) -> str:
        return ','.join(f'{k}={v}' for k, v in sorted(self.params.items()))

    def overrides(self) -> Dict[str, Any]:
        """Nested config overrides from dotted parameter names."""
        nested: Dict[str, Any] = {}
        for dotted, value in self.params.items():
            node = nested
            parts = dotted.split('.')
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        return nested


def expand_grid(grid: Dict[str, Sequence[Any]]) -> List[Job]:
    """
    Cartesian product of a parameter grid, parameters in sorted order.

    Args:
        grid: Dotted config key -> list of values

    Returns:
        list of Job

    Raises:
        ConfigError: A parameter has no values
    """
    names = sorted(grid)
    values = []
    for name in names:
        options = grid[name]
        if not isinstance(options, (list, tuple)) or not options:
            raise ConfigError(f"sweep parameter '{name}' needs a non-empty list of values")
        values.append(list(options))
    return [Job(i, dict(zip(names, combo))) for i, combo in enumerate(itertools.product(*values))]


class Pipeline:
    """
    Bounded worker pool over independent jobs.

    A job that raises a ParaSurfError yields an error row instead of stopping
    the sweep; any other exception propagates.
    """

    def __init__(self, workers: int = 4):
        """
        Initialize the pipeline.

        Args:
            workers: Maximum number of concurrent jobs
        """
        if int(workers) < 1:
            raise ConfigError(f"workers must be at least 1, got {workers}")
        self.workers = int(workers)
        self._lock = threading.Lock()
        self.completed = 0
        logger.debug(f"Pipeline initialized with {self.workers} worker(s)")

    def _run_one(self, fn: Callable[[Job], Dict[str, Any]], job: Job) -> Dict[str, Any]:
        try:
            row = fn(job)
            row = {'status': 'ok', **row}
        except ParaSurfError as e:
            logger.error(f"Job {job.index} ({job.key}) failed: {type(e).__name__}: {e}")
            row = {'status': 'error', 'error': f"{type(e).__name__}: {e}"}
        with self._lock:
            self.completed += 1
        return {'index': job.index, 'params': dict(job.params), **row}

    def run(self, fn: Callable[[Job], Dict[str, Any]], jobs: Sequence[Job],
            on_done: Optional[Callable[[Dict[str, Any]], None]] = None) -> List[Dict[str, Any]]:
        """
        Run fn over all jobs.

        Args:
            fn: Job -> result row
            jobs: Jobs to run
            on_done: Called with each row as it completes

        Returns:
            list: Result rows in submission order
        """
        logger.info(f"Running {len(jobs)} job(s) on {self.workers} worker(s)")
        results: Dict[int, Dict[str, Any]] = {}
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            futures = {executor.submit(self._run_one, fn, job): job for job in jobs}
            for future in as_completed(futures):
                row = future.result()
                results[row['index']] = row
                logger.info(f"Job {row['index'] + 1}/{len(jobs)} done ({row['status']})")
                if on_done:
                    on_done(row)
        return [results[job.index] for job in jobs]

    def get_status(self) -> Dict[str, int]:
        return {'workers': self.workers, 'completed': self.completed}
