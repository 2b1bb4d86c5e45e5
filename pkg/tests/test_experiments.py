import json
import math

import pandas as pd
import pytest

from cardy_lattices import lattice
from cardy_lattices.errors import ConfigError, PreconditionError
from cardy_lattices.experiments import runners
from cardy_lattices.experiments import utils as exp_utils
from cardy_lattices.percolation import rng


def _config(experiment, **kwargs):
    return exp_utils.ExperimentConfig(experiment, **kwargs)


def test_config_defaults():
    config = _config('verify-cardy')
    assert config.family == lattice.TRIANGULAR_K
    assert config.k == 1
    assert config.delta == 1 / 100
    assert config.n_samples == 10**5
    assert config.seed == 20100301
    assert config.x_params == (.25, .5, .75)
    assert config.effective_p() == .5
    assert config.to_dict()['x_params'] == [.25, .5, .75]


@pytest.mark.parametrize('kwargs', [
    {
        'x_params': [.5, 1.]
    },
    {
        'x_params': []
    },
    {
        'family': 'Hexagonal'
    },
    {
        'family': lattice.SQUARE,
        'k': 2
    },
    {
        'k': .5
    },
    {
        'delta': 0
    },
    {
        'n_samples': 0
    },
    {
        'n_samples': 1.5
    },
    {
        'p': 1.2
    },
    {
        'format': 'xlsx'
    },
    {
        'periods': [[1, 0, 0]]
    },
    {
        'seed': 'abc'
    },
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        _config('verify-cardy', **kwargs)


def test_config_unknown_keys():
    with pytest.raises(ConfigError, match='n_workers'):
        exp_utils.ExperimentConfig.from_dict({
            'experiment': 'sweep',
            'n_workers': 4
        })
    with pytest.raises(ConfigError):
        _config('plot')


def test_load_config_precedence(tmp_path):
    config_filepath = tmp_path / 'config.json'
    config_filepath.write_text(
        json.dumps({
            'experiment': 'violation',
            'k': 2,
            'delta': 0.05,
            'seed': 1
        }))
    config = exp_utils.load_config('violation', str(config_filepath), {
        'seed': 7,
        'n_samples': None
    })
    assert config.k == 2
    assert config.delta == .05
    assert config.seed == 7
    assert config.n_samples == 10**5

    # the file must be meant for the requested experiment
    with pytest.raises(ConfigError):
        exp_utils.load_config('sweep', str(config_filepath))
    config_filepath.write_text('{not json')
    with pytest.raises(ConfigError):
        exp_utils.load_config('violation', str(config_filepath))


def test_effective_p_unknown():
    config = _config('sweep', family=lattice.TRI_NE)
    with pytest.raises(ConfigError):
        config.effective_p()
    assert _config('sweep', family=lattice.TRI_NE, p=.6).effective_p() == .6


def test_result_rows():
    config = _config('verify-cardy',
                     delta=1 / 10,
                     x_params=[.3],
                     n_samples=400,
                     seed=3)
    result = runners.run_verify_cardy(config)
    assert list(result.rows.columns) == exp_utils.RESULT_COLUMNS
    row = result.rows.iloc[0]
    assert row['deviation'] == row['p_hat'] - row['cardy_X']
    assert math.isfinite(row['z_score'])
    assert math.isclose(
        row['z_score'],
        row['deviation'] / ((row['ci_high'] - row['ci_low']) / 3.92))
    assert row['p_hat'] == row['successes'] / row['n']
    assert math.isclose(row['cardy_X'], row['x_snapped'])


def test_dump_result_csv(tmp_path):
    config = _config('predict', x_params=[.25, .5], k_values=[1, 2])
    result = runners.run_predict(config)
    dst_filepath = tmp_path / 'predict.csv'
    exp_utils.dump_result(config, result, str(dst_filepath))
    lines = dst_filepath.read_text().splitlines()
    header = [line for line in lines if line.startswith('#')]
    assert lines[:len(header)] == header
    assert '# verdict: PASS' in header
    assert any(line.startswith('# rng: ') for line in header)
    assert '# config.k_values: [1.0, 2.0]' in header
    assert not any(line.startswith('# config.out') for line in header)
    assert lines[len(header)] == 'k,kappa,x,w,X,residual'
    df = pd.read_csv(dst_filepath, comment='#')
    assert len(df) == 4


def test_dump_result_json(capsys):
    config = _config('validate-lattice', format='json', window_radius=4)
    result = runners.run_validate_lattice(config)
    exp_utils.dump_result(config, result)
    payload = json.loads(capsys.readouterr().out)
    assert payload['verdict'] == exp_utils.PASS
    # one object per row
    assert len(payload['rows']) == len(result.rows)
    assert [row['check'] for row in payload['rows'][:3]
            ] == ['degree', 'edge_length', 'connectivity']
    assert all(row['passed'] is True for row in payload['rows'][:3])
    assert f'rng: {rng.RNG_VERSION}' in payload['provenance']


def test_run_predict():
    config = _config('predict', x_params=[.1, .25, .5], k_values=[1, 2**-.5])
    result = runners.run_predict(config)
    assert result.ok
    df = result.rows
    assert list(df.columns) == exp_utils.PREDICT_COLUMNS
    equilateral = df[df['k'] == 1]
    assert (equilateral['X'] - equilateral['x']).abs().max() <= 1e-9
    assert (df[df['x'] == .5]['X'] - .5).abs().max() <= 1e-12
    right = df[df['k'] != 1]
    assert right['residual'].max() > right['residual'].min()


def test_run_validate_lattice():
    config = _config('validate-lattice',
                     family=lattice.SQUARE_NE,
                     window_radius=6,
                     periods=[[1, 0]])
    result = runners.run_validate_lattice(config)
    assert result.ok
    assert list(result.rows.columns) == exp_utils.VALIDATE_COLUMNS
    assert len(result.rows) == 4


def test_run_validate_lattice_requested_mesh():
    config = _config('validate-lattice', family=lattice.SQUARE_NE, delta=1.)
    result = runners.run_validate_lattice(config)
    assert result.ok
    df = result.rows
    assert (df['delta'] == 1.).all()
    periods = df[df['check'].str.startswith('period')]
    assert list(periods['check']) == ['period(1,0)', 'period(0,1)']
    assert periods['passed'].all()


def test_run_coupling():
    config = _config('coupling',
                     k=2,
                     delta=1 / 64,
                     x_params=[.25],
                     n_samples=1000)
    result = runners.run_coupling(config)
    assert result.ok
    assert result.notes == ['agreement x=0.25: 1000/1000']
    assert result.rows['successes'].nunique() == 1


def test_run_coupling_square_ne():
    config = _config('coupling',
                     family=lattice.SQUARE_NE,
                     delta=1 / 64,
                     x_params=[.25],
                     n_samples=1000)
    result = runners.run_coupling(config)
    assert result.ok
    assert result.notes == ['agreement x=0.25: 1000/1000']
    assert list(result.rows['family']) == [
        lattice.SQUARE_NE, lattice.TRIANGULAR_K
    ]


def test_run_coupling_mismatch():
    config = _config('coupling',
                     k=2,
                     delta=1 / 16,
                     pair_delta=1 / 20,
                     x_params=[.25],
                     n_samples=10)
    with pytest.raises(PreconditionError) as excinfo:
        runners.run_coupling(config)
    assert excinfo.value.site is not None


def test_run_preconditions():
    with pytest.raises(ConfigError):
        runners.run_verify_cardy(_config('verify-cardy', k=2))
    with pytest.raises(ConfigError):
        runners.run_coupling(_config('coupling'))
    with pytest.raises(ConfigError):
        runners.run_violation(_config('violation', family=lattice.TRI_NW))
    with pytest.raises(ConfigError):
        runners.run_sweep(_config('sweep', family=lattice.SQUARE))


def test_run_violation_control():
    config = _config('violation', delta=1 / 10, x_params=[.5], n_samples=200)
    result = runners.run_violation(config)
    assert result.verdict == exp_utils.NO_VIOLATION
    assert not result.ok
    assert len(result.rows) == 1


def test_run_sweep_critical():
    config = _config('sweep',
                     deltas=[1 / 10, 1 / 20],
                     p_values=[.5],
                     x_params=[.5],
                     n_samples=200)
    result = runners.run_sweep(config)
    assert result.ok
    # coarsest mesh first
    assert list(result.rows['delta']) == [1 / 10, 1 / 20]
    assert 'heuristic stabilization' in result.notes[0]


def test_run_sweep_sub_lattice():
    config = _config('sweep',
                     family=lattice.TRI_NW,
                     deltas=[1 / 10],
                     p_values=[.5, .7],
                     x_params=[.5],
                     n_samples=100)
    result = runners.run_sweep(config)
    assert result.ok
    assert all('exploratory' in note for note in result.notes)
    deviation = result.rows['cardy_X'] - result.rows['x_snapped']
    assert deviation.abs().max() < 1e-9


@pytest.mark.slow
def test_verify_cardy_acceptance():
    result = runners.run_verify_cardy(_config('verify-cardy'))
    assert result.verdict == exp_utils.PASS
    half = result.rows[result.rows['x_requested'] == .5].iloc[0]
    assert abs(half['p_hat'] - .5) <= .02


@pytest.mark.slow
def test_violation_acceptance():
    result = runners.run_violation(_config('violation', k=2))
    assert result.verdict == exp_utils.CONFIRMS_VIOLATION
    row = result.rows[(result.rows['k'] == 2)
                      & (result.rows['x_requested'] == .25)].iloc[0]
    # X > x for kappa > pi/3
    assert row['cardy_X'] > .25
    assert row['deviation'] < 0
    assert abs(row['deviation']) > 3 * (row['ci_high'] - row['ci_low']) / 2

    result = runners.run_violation(_config('violation',
                                           family=lattice.SQUARE_NE))
    assert result.verdict == exp_utils.CONFIRMS_VIOLATION
    row = result.rows[(result.rows['family'] == lattice.SQUARE_NE)
                      & (result.rows['x_requested'] == .25)].iloc[0]
    assert row['cardy_X'] < .25


@pytest.mark.slow
def test_sweep_acceptance():
    config = _config('sweep', p_values=[.4, .6], x_params=[.5])
    result = runners.run_sweep(config)
    assert result.verdict == exp_utils.PASS
    finest = result.rows[result.rows['delta'] == 1 / 40]
    assert finest[finest['p'] == .4]['p_hat'].iloc[0] < .1
    assert finest[finest['p'] == .6]['p_hat'].iloc[0] > .9
