import io
import json
import os

import pytest
import yaml

from core.orchestrator import EXIT_CONFIG, EXIT_OK, Orchestrator
from engine.errors import MissingArtifacts
from engine.output.artifacts import META_FILE, RESULT_FILE, TRACE_FILE
from engine.output.formatter import report, sci, verdict
from main import build_parser, main
from utils.path_helper import get_config_path, get_resource_path

H0_CONFIG = get_config_path('experiments/torus_h0.yaml')


def run(command, config=None, out=None, **kwargs):
    stdout, stderr = io.StringIO(), io.StringIO()
    code = Orchestrator(stdout=stdout, stderr=stderr).run(command, config, out, **kwargs)
    return code, stdout.getvalue(), stderr.getvalue()


def write_config(tmp_path, data, name='experiment.yaml'):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_flat_solve_succeeds(tmp_path):
    out = tmp_path / 'h0'
    code, text, _ = run('solve', H0_CONFIG, str(out))
    assert code == EXIT_OK
    result = json.loads((out / RESULT_FILE).read_text())
    assert result['solve']['residual'] <= 1e-14
    assert result['solve']['obstruction'] == [0.0, 0.0, 0.0, 0.0]
    assert result['status'] == 'PASS'
    for name in (META_FILE, TRACE_FILE, 'fields/w.bin', 'fields/w.bin.json', 'plots/residual.csv'):
        assert (out / name).exists(), name
    assert 'status PASS' in text


def test_report_of_flat_run(tmp_path):
    out = tmp_path / 'h0'
    assert run('solve', H0_CONFIG, str(out))[0] == EXIT_OK
    text = report(str(out))
    assert text.startswith('ParaSurf report: solve')
    assert '(tol 1.0e-9) PASS' in text.splitlines()[2]
    assert text.endswith('status PASS\n')


def test_results_are_deterministic(tmp_path):
    first, second = tmp_path / 'a', tmp_path / 'b'
    assert run('solve', H0_CONFIG, str(first), seed=7)[0] == EXIT_OK
    assert run('solve', H0_CONFIG, str(second), seed=7)[0] == EXIT_OK
    assert (first / RESULT_FILE).read_bytes() == (second / RESULT_FILE).read_bytes()
    assert (first / TRACE_FILE).read_bytes() == (second / TRACE_FILE).read_bytes()
    assert report(str(first)) == report(str(second))


def test_resolution_must_be_power_of_two(tmp_path):
    config = write_config(tmp_path, {'surface': get_resource_path('config/surfaces/torus.origami'), 'resolution': 100})
    code, text, err = run('solve', config, str(tmp_path / 'out'))
    assert code == EXIT_CONFIG
    assert text == ''
    assert err.startswith('ConfigError: ')
    assert '100' in err


def test_missing_surface_is_a_config_error(tmp_path):
    config = write_config(tmp_path, {'surface': 'nowhere.origami'})
    code, _, err = run('solve', config, str(tmp_path / 'out'))
    assert code == EXIT_CONFIG
    assert 'surface file not found' in err


def test_bad_permutation_is_a_config_error(tmp_path):
    (tmp_path / 'bad.origami').write_text("squares=3\nh=2,2,3\nv=1,2,3\n")
    config = write_config(tmp_path, {'surface': 'bad.origami'})
    code, _, err = run('solve', config, str(tmp_path / 'out'))
    assert code == EXIT_CONFIG
    assert err.startswith('NotAPermutation: ')


def test_unknown_command(tmp_path):
    code, _, err = run('integrate', H0_CONFIG, str(tmp_path / 'out'))
    assert code == EXIT_CONFIG
    assert 'unknown command' in err


def test_numerical_failure_exit_code(tmp_path):
    config = write_config(tmp_path, {
        'surface': get_resource_path('config/surfaces/torus.origami'),
        'resolution': 16,
        'hamiltonian': {'terms': [{'coefficient': 0.5, 'expr': 'cos_base(1,0)'}]},
    })
    code, _, err = run('solve', config, str(tmp_path / 'out'))
    assert code == 2
    assert err.startswith('SmallnessGateFailed: ')


def test_report_of_empty_directory(tmp_path):
    with pytest.raises(MissingArtifacts):
        report(str(tmp_path))
    stderr = io.StringIO()
    assert Orchestrator(stdout=io.StringIO(), stderr=stderr).report(str(tmp_path)) == EXIT_CONFIG
    assert stderr.getvalue().startswith('MissingArtifacts: ')


def test_out_environment_variable_wins(tmp_path, monkeypatch):
    target = tmp_path / 'from_env'
    monkeypatch.setenv('PARASURF_OUT', str(target))
    assert run('solve', H0_CONFIG, str(tmp_path / 'from_flag'))[0] == EXIT_OK
    assert (target / RESULT_FILE).exists()
    assert not (tmp_path / 'from_flag').exists()


def test_main_runs_and_reports(tmp_path, capsys):
    out = str(tmp_path / 'h0')
    assert main(['solve', '--config', H0_CONFIG, '--out', out, '--seed', '3']) == 0
    assert main(['report', out]) == 0
    assert 'status PASS' in capsys.readouterr().out
    meta = json.loads((tmp_path / 'h0' / META_FILE).read_text())
    assert meta['experiment']['seed'] == 3
    assert meta['command'] == 'solve'


def test_seed_must_be_unsigned():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['solve', '--seed', '-1'])
    assert build_parser().parse_args(['solve', '--seed', str(2 ** 64 - 1)]).seed == 2 ** 64 - 1


def test_scientific_formatting():
    assert sci(0.0) == '0.0e0'
    assert sci(1.234e-10) == '1.2e-10'
    assert sci(None) == 'n/a'
    assert sci(float('inf')) == 'inf'
    assert verdict(1e-12, 1e-9) == 'PASS'
    assert verdict(1e-6, 1e-9) == 'FAIL'
    assert verdict('nan', 1e-9) == 'FAIL'


@pytest.mark.slow
def test_check_identities_command(tmp_path):
    config = write_config(tmp_path, {
        'surface': get_resource_path('config/surfaces/torus.origami'),
        'direction': {'xi': [1.0, 1.618033988749895]},
        'resolution': 64,
        'identities': {'n_samples': 2, 'n_points': 200},
    })
    out = tmp_path / 'ids'
    code, text, _ = run('check-identities', config, str(out))
    assert code == EXIT_OK
    result = json.loads((out / RESULT_FILE).read_text())
    assert all(row['status'] == 'pass' for row in result['identities'])
    assert os.path.exists(out / 'identities.csv')
    assert 'status PASS' in text


def l3_config(tmp_path, **sections):
    data = {
        'surface': get_resource_path('config/surfaces/l3.origami'),
        'direction': {'xi': [1.0, 1.618033988749895]},
        'resolution': 16,
        'hamiltonian': {'epsilon': 1e-6, 'terms': [{'coefficient': 1.0, 'expr': 'cos_base(1,0)*fiber_poly(1,0)'}]},
        'numerics': {'n_modes': 61},
        'tolerances': {'max_iter': 40, 'cohomology': {'n_candidates': 60, 'min_gap_ratio': 1.0}},
    }
    data.update(sections)
    return write_config(tmp_path, data)


def test_origami_solve_runs_end_to_end(tmp_path):
    config = l3_config(tmp_path, solve={'conjugacy': False})
    out = tmp_path / 'l3'
    code, text, err = run('solve', config, str(out))
    assert code == EXIT_OK, err
    assert 'BasisUnavailable' not in err
    result = json.loads((out / RESULT_FILE).read_text())
    obstruction = result['solve']['obstruction']
    assert obstruction and len(obstruction) % 4 == 0
    assert result['solve']['identity_residual'] <= result['solve']['back_substitution_residual'] + 1e-8
    assert result['status'] in ('PASS', 'FAIL')
    assert f"status {result['status']}" in text


def test_origami_ce_status_follows_its_residuals(tmp_path):
    config = l3_config(tmp_path, ce={'expr': 'cos_base(1,0)', 'samples': 2})
    out = tmp_path / 'ce'
    code, _, err = run('ce', config, str(out))
    assert code == EXIT_OK, err
    result = json.loads((out / RESULT_FILE).read_text())
    ce, tolerances = result['ce'], result['tolerances']
    assert ce['sup_residual'] >= ce['residual'] / 3.0 ** 0.5
    passed = ce['residual'] <= tolerances['residual_tol'] and ce['sup_residual'] <= tolerances['sup_residual_tol']
    assert result['status'] == ('PASS' if passed else 'FAIL')
    assert ce['solution_norm'] is None or ce['solution_norm'] > 0.0


@pytest.mark.slow
def test_l3_obstruction_counts_grow_with_order(tmp_path):
    out = tmp_path / 'l3_obstructions'
    code, _, err = run('obstructions', get_config_path('experiments/l3_obstructions.yaml'), str(out))
    assert code == EXIT_OK, err
    result = json.loads((out / RESULT_FILE).read_text())
    rows = result['obstructions']
    counts = [row['count'] for row in rows]
    assert [row['s'] for row in rows] == [1.0, 2.0, 3.0]
    assert counts[0] >= 1
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert all(row['gap_ratio'] >= 10.0 for row in rows)
    assert result['status'] == 'PASS'
