import json

import pandas as pd
import pytest
from click.testing import CliRunner

from cardy_lattices.experiments import cli
from cardy_lattices.experiments import utils as exp_utils


@pytest.fixture
def runner():
    return CliRunner()


def _invoke(runner, args, env=None):
    return runner.invoke(cli.cli, ['-q'] + args, env=env)


def test_predict(runner, tmp_path):
    dst_filepath = tmp_path / 'predict.csv'
    result = _invoke(runner, [
        'predict', '--x', '0.25', '--x', '0.5', '--k', '1', '--k', '2',
        '--out',
        str(dst_filepath)
    ])
    assert result.exit_code == cli.EXIT_OK
    df = pd.read_csv(dst_filepath, comment='#')
    assert list(df.columns) == exp_utils.PREDICT_COLUMNS
    assert len(df) == 4


def test_predict_upper_tail(runner, tmp_path):
    dst_filepath = tmp_path / 'predict.csv'
    result = _invoke(runner, [
        'predict', '--x', '0.999999', '--x', '0.999999999', '--k', '1',
        '--out',
        str(dst_filepath)
    ])
    assert result.exit_code == cli.EXIT_OK
    df = pd.read_csv(dst_filepath, comment='#')
    assert (df['X'] - df['x']).abs().max() <= 1e-10


def test_validate_lattice_json(runner, tmp_path):
    dst_filepath = tmp_path / 'validate.json'
    result = _invoke(runner, [
        'validate-lattice', '--family', 'TriH', '--window-radius', '4',
        '--format', 'json', '--out',
        str(dst_filepath)
    ])
    assert result.exit_code == cli.EXIT_OK
    payload = json.loads(dst_filepath.read_text())
    assert payload['verdict'] == exp_utils.PASS
    assert payload['rows'][0]['family'] == 'TriH'
    assert payload['rows'][0]['k'] is None


def test_config_errors(runner, tmp_path):
    out = str(tmp_path / 'out.csv')
    # x outside (0, 1)
    result = _invoke(runner, ['verify-cardy', '--x', '1.5', '--out', out])
    assert result.exit_code == cli.EXIT_CONFIG
    # several values for a single-valued flag
    result = _invoke(runner,
                     ['coupling', '--k', '2', '--k', '3', '--out', out])
    assert result.exit_code == cli.EXIT_CONFIG
    # unknown config key
    config_filepath = tmp_path / 'config.json'
    config_filepath.write_text(json.dumps({'n_workers': 2}))
    result = _invoke(
        runner,
        ['sweep', '--config',
         str(config_filepath), '--out', out])
    assert result.exit_code == cli.EXIT_CONFIG
    # run-time configuration errors
    result = _invoke(runner,
                     ['verify-cardy', '--k', '2', '--n', '10', '--out', out])
    assert result.exit_code == cli.EXIT_CONFIG
    # snaps onto a corner at this mesh
    result = _invoke(runner, [
        'verify-cardy', '--delta', '0.5', '--x', '0.1', '--n', '10', '--out',
        out
    ])
    assert result.exit_code == cli.EXIT_CONFIG
    # unknown family
    result = _invoke(runner, ['sweep', '--family', 'Kagome'])
    assert result.exit_code == 2


def test_coupling_mismatch(runner, tmp_path):
    result = _invoke(runner, [
        'coupling', '--k', '2', '--delta', '0.0625', '--pair-delta', '0.05',
        '--x', '0.25', '--n', '10', '--out',
        str(tmp_path / 'coupling.csv')
    ])
    assert result.exit_code == cli.EXIT_PRECONDITION


def test_violation_control(runner, tmp_path):
    result = _invoke(runner, [
        'violation', '--k', '1', '--delta', '0.1', '--x', '0.5', '--n', '100',
        '--out',
        str(tmp_path / 'violation.csv')
    ])
    assert result.exit_code == cli.EXIT_VERDICT
    lines = (tmp_path / 'violation.csv').read_text().splitlines()
    assert '# verdict: NO-VIOLATION' in lines


def test_deterministic_output(runner, tmp_path):
    args = [
        'coupling', '--k', '2', '--delta', '0.0625', '--x', '0.25', '--x',
        '0.75', '--n', '300', '--seed', '11'
    ]
    contents = []
    for n_jobs, block_size in [('1', '500'), ('2', '64'), ('1', '7')]:
        dst_filepath = tmp_path / f'coupling-{n_jobs}-{block_size}.csv'
        result = _invoke(runner,
                         args + ['--out', str(dst_filepath)],
                         env={
                             'CARDY_LATTICES_N_JOBS': n_jobs,
                             'CARDY_LATTICES_BLOCK_SIZE': block_size
                         })
        assert result.exit_code == cli.EXIT_OK
        contents.append(dst_filepath.read_bytes())
    assert contents[0] == contents[1] == contents[2]
    lines = contents[0].decode().splitlines()
    header = [line for line in lines if line.startswith('#')]
    assert lines[len(header)] == ','.join(exp_utils.RESULT_COLUMNS)
    assert '# agreement x=0.25: 300/300' in header
    assert not any(line.startswith('# config.out') for line in header)


def test_config_file_precedence(runner, tmp_path):
    config_filepath = tmp_path / 'config.json'
    config_filepath.write_text(
        json.dumps({
            'experiment': 'predict',
            'x_params': [0.1, 0.2],
            'k_values': [2]
        }))
    dst_filepath = tmp_path / 'predict.csv'
    result = _invoke(runner, [
        'predict', '--config',
        str(config_filepath), '--x', '0.3', '--out',
        str(dst_filepath)
    ])
    assert result.exit_code == cli.EXIT_OK
    df = pd.read_csv(dst_filepath, comment='#')
    assert list(df['x']) == [.3]
    assert list(df['k']) == [2]
