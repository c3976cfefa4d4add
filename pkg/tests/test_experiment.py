import json

import numpy as np
import pytest
import yaml

from engine.errors import ConfigError, MissingArtifacts
from engine.output.artifacts import RESULT_FILE, RunDirectory
from models.experiment import load_experiment
from models.field import Field
from models.results import IterationRecord
from utils.path_helper import get_config_path, get_resource_path

TORUS = get_resource_path('config/surfaces/torus.origami')


def write(tmp_path, data):
    path = tmp_path / 'experiment.yaml'
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_shipped_experiment_loads():
    experiment = load_experiment(get_config_path('experiments/torus_h0.yaml'))
    assert experiment.name == 'torus_h0'
    assert experiment.resolution == 32
    assert experiment.xi == (1.0, 1.618033988749895)
    assert experiment.to_dict()['surface'] == 'torus.origami'
    solver = experiment.section('solver')
    assert solver['s'] == 2.0 and solver['t'] == 1.0
    assert solver['residual_tol'] == 1e-9


def test_defaults_without_a_file():
    experiment = load_experiment(None, seed=11)
    assert experiment.name == 'default'
    assert experiment.seed == 11
    assert experiment.surface_path.endswith('torus.origami')


@pytest.mark.parametrize('resolution', [100, 8, 0, '32', True])
def test_bad_resolution(tmp_path, resolution):
    with pytest.raises(ConfigError):
        load_experiment(write(tmp_path, {'surface': TORUS, 'resolution': resolution}))


@pytest.mark.parametrize('override', [
    {'seed': -1},
    {'direction': {'xi': [0.0, 0.0]}},
    {'direction': {'xi': [1.0]}},
    {'direction': {'xi': [1.0, 2.0], 'diophantine_floor': 0.0}},
    {'hamiltonian': {'terms': [{'coefficient': 1.0}]}},
    {'surface': 'missing.origami'},
])
def test_invalid_settings(tmp_path, override):
    with pytest.raises(ConfigError):
        load_experiment(write(tmp_path, {'surface': TORUS, **override}))


def test_missing_or_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        load_experiment(str(tmp_path / 'absent.yaml'))
    path = tmp_path / 'list.yaml'
    path.write_text('- 1\n- 2\n')
    with pytest.raises(ConfigError):
        load_experiment(str(path))


def test_overrides_revalidate(tmp_path):
    experiment = load_experiment(write(tmp_path, {'surface': TORUS, 'resolution': 16}))
    changed = experiment.with_overrides({'sobolev': {'s': 3.0}, 'hamiltonian': {'epsilon': 1e-3}})
    assert changed.s == 3.0
    assert changed.hamiltonian['epsilon'] == 1e-3
    assert changed.name == experiment.name
    with pytest.raises(ConfigError):
        experiment.with_overrides({'resolution': 24})


def test_run_directory_artifacts(tmp_path, torus_grid):
    run_dir = RunDirectory(str(tmp_path / 'run'))
    run_dir.write_result({'b': 1.5, 'a': np.float64(0.25), 'c': np.arange(3)})
    text = (tmp_path / 'run' / RESULT_FILE).read_text()
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert run_dir.read_result() == {'a': 0.25, 'b': 1.5, 'c': [0, 1, 2]}

    run_dir.write_trace([IterationRecord(1, 0.1, 0.2, 0.3)])
    assert (tmp_path / 'run' / 'trace.csv').read_text() == 'iter,residual,increment,contraction_factor\n1,0.1,0.2,0.3\n'

    run_dir.write_plot('curve', 'x', 'y', [0, 1], [1e-3, 2.5])
    assert (tmp_path / 'run' / 'plots' / 'curve.csv').read_text() == 'x,y\n0,0.001\n1,2.5\n'

    field = Field.constant(torus_grid, 2.0)
    path = run_dir.write_field('one', field)
    np.testing.assert_array_equal(Field.load(path, torus_grid).values, field.values)
    sidecar = json.loads((tmp_path / 'run' / 'fields' / 'one.bin.json').read_text())
    assert sidecar['resolution'] == 32
    assert 'fields/one.bin' in run_dir.list_files()


def test_corrupt_result_is_missing(tmp_path):
    (tmp_path / RESULT_FILE).write_text('{not json')
    with pytest.raises(MissingArtifacts):
        RunDirectory(str(tmp_path), create=False).read_result()
