import threading
import time

import pytest

from core.pipeline import Job, Pipeline, expand_grid
from engine.errors import ConfigError, NoConvergence


def test_grid_expands_in_sorted_parameter_order():
    jobs = expand_grid({'sobolev.s': [2.0, 3.0], 'hamiltonian.epsilon': [1e-4, 1e-3]})
    assert [job.index for job in jobs] == [0, 1, 2, 3]
    assert jobs[0].params == {'hamiltonian.epsilon': 1e-4, 'sobolev.s': 2.0}
    assert jobs[1].params == {'hamiltonian.epsilon': 1e-4, 'sobolev.s': 3.0}
    assert jobs[3].key == 'hamiltonian.epsilon=0.001,sobolev.s=3.0'


def test_empty_grid_is_one_job():
    assert expand_grid({}) == [Job(0, {})]


@pytest.mark.parametrize('values', [[], (), 3, None])
def test_parameter_needs_values(values):
    with pytest.raises(ConfigError):
        expand_grid({'sobolev.s': values})


def test_dotted_names_become_nested_overrides():
    job = Job(0, {'hamiltonian.epsilon': 1e-3, 'sobolev.s': 2.0, 'seed': 4})
    assert job.overrides() == {'hamiltonian': {'epsilon': 1e-3}, 'sobolev': {'s': 2.0}, 'seed': 4}


def test_pool_needs_a_worker():
    with pytest.raises(ConfigError):
        Pipeline(0)


@pytest.mark.parametrize('workers', [1, 3, 8])
def test_rows_come_back_in_submission_order(workers):
    jobs = expand_grid({'n': list(range(8))})

    def slow_first(job):
        # earlier jobs finish later
        time.sleep(0.002 * (8 - job.params['n']))
        return {'square': job.params['n'] ** 2}

    rows = Pipeline(workers).run(slow_first, jobs)
    assert [r['index'] for r in rows] == list(range(8))
    assert [r['square'] for r in rows] == [n * n for n in range(8)]
    assert all(r['status'] == 'ok' for r in rows)


def test_failing_job_becomes_an_error_row():
    seen = []
    lock = threading.Lock()

    def fn(job):
        if job.params['n'] == 1:
            raise NoConvergence('series stalled')
        return {'value': job.params['n']}

    def on_done(row):
        with lock:
            seen.append(row['index'])

    pipeline = Pipeline(2)
    rows = pipeline.run(fn, expand_grid({'n': [0, 1, 2]}), on_done)
    assert rows[1] == {'index': 1, 'params': {'n': 1}, 'status': 'error', 'error': 'NoConvergence: series stalled'}
    assert rows[0]['value'] == 0 and rows[2]['value'] == 2
    assert sorted(seen) == [0, 1, 2]
    assert pipeline.get_status() == {'workers': 2, 'completed': 3}


def test_unexpected_errors_propagate():
    def fn(job):
        raise RuntimeError('boom')

    with pytest.raises(RuntimeError):
        Pipeline(1).run(fn, expand_grid({'n': [0]}))
