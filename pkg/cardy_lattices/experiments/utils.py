import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd

import cardy_lattices
from cardy_lattices import lattice, settings
from cardy_lattices.errors import ConfigError, DomainError
from cardy_lattices.percolation import rng

EXPERIMENTS = [
    'verify-cardy', 'coupling', 'violation', 'sweep', 'predict',
    'validate-lattice'
]
FORMATS = ['csv', 'json']

RESULT_COLUMNS = [
    'family', 'k', 'delta', 'p', 'x_requested', 'x_snapped', 'n',
    'successes', 'p_hat', 'ci_low', 'ci_high', 'cardy_X', 'deviation',
    'z_score'
]
PREDICT_COLUMNS = ['k', 'kappa', 'x', 'w', 'X', 'residual']
VALIDATE_COLUMNS = ['family', 'k', 'delta', 'check', 'passed', 'detail']
# config keys left out of the provenance header
PROVENANCE_EXCLUDE = ['out']

# verdicts
PASS = 'PASS'
FAIL = 'FAIL'
CONFIRMS_VIOLATION = 'CONFIRMS-VIOLATION'
NO_VIOLATION = 'NO-VIOLATION'

# z-score of a 95% interval is its width over 2 * 1.96
Z_WIDTH = 3.92

logger = logging.getLogger(__name__)


def _as_float_list(key, values):
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError(f"{key} must be a non-empty list, got {values!r}")
    return tuple(_as_float(key, value) for value in values)


def _as_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key} must be finite, got {value!r}")
    return float(value)


def _as_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    family: str = lattice.TRIANGULAR_K
    k: float = None
    delta: float = settings.DEFAULT_DELTA
    x_params: tuple = tuple(settings.DEFAULT_X_PARAMS)
    p: float = None
    n_samples: int = settings.DEFAULT_N_SAMPLES
    seed: int = settings.DEFAULT_SEED
    out: str = None
    format: str = 'csv'
    p_values: tuple = tuple(settings.DEFAULT_SWEEP_P_VALUES)
    deltas: tuple = tuple(settings.DEFAULT_SWEEP_DELTAS)
    k_values: tuple = tuple(settings.DEFAULT_PREDICT_K_VALUES)
    window_radius: int = settings.DEFAULT_WINDOW_RADIUS
    periods: tuple = tuple(tuple(v) for v in settings.DEFAULT_PERIODS)
    # mesh of the equilateral partner in coupling runs (guard tests only)
    pair_delta: float = None

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}, "
                              f"expected one of {EXPERIMENTS}")
        if self.family not in lattice.FAMILY_TAGS:
            raise ConfigError(f"unknown family {self.family!r}, expected one "
                              f"of {lattice.FAMILY_TAGS}")
        if self.family == lattice.TRIANGULAR_K:
            set_('k', 1. if self.k is None else _as_float('k', self.k))
        elif self.k is not None:
            raise ConfigError(f"family {self.family} takes no k")
        set_('delta', _as_float('delta', self.delta))
        set_('x_params', _as_float_list('x_params', self.x_params))
        for x in self.x_params:
            if not 0 < x < 1:
                raise ConfigError(f"x_params must lie in (0, 1), got {x!r}")
        if self.p is not None:
            set_('p', _as_float('p', self.p))
        set_('n_samples', _as_int('n_samples', self.n_samples))
        if self.n_samples < 1:
            raise ConfigError(
                f"n_samples must be positive, got {self.n_samples}")
        set_('seed', _as_int('seed', self.seed))
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got "
                              f"{self.format!r}")
        set_('p_values', _as_float_list('p_values', self.p_values))
        for p in self.p_values + (() if self.p is None else (self.p, )):
            if not 0 <= p <= 1:
                raise ConfigError(f"p must lie in [0, 1], got {p!r}")
        set_('deltas', _as_float_list('deltas', self.deltas))
        set_('k_values', _as_float_list('k_values', self.k_values))
        set_('window_radius', _as_int('window_radius', self.window_radius))
        if not isinstance(self.periods, (list, tuple)) or any(
                not isinstance(v, (list, tuple)) or len(v) != 2
                for v in self.periods):
            raise ConfigError(
                f"periods must be a list of 2-vectors, got {self.periods!r}")
        set_('periods',
             tuple(_as_float_list('periods', v) for v in self.periods))
        if self.pair_delta is not None:
            set_('pair_delta', _as_float('pair_delta', self.pair_delta))
        # the lattice layer has the last word on k, delta and the k grid
        try:
            for delta in (self.delta, ) + self.deltas:
                self.lattice_spec(delta)
            for k in self.k_values:
                lattice.LatticeFamily(lattice.TRIANGULAR_K, k)
        except DomainError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_dict(cls, config_dict):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(config_dict) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if 'experiment' not in config_dict:
            raise ConfigError("the config does not name an experiment")
        return cls(**config_dict)

    @property
    def lattice_family(self):
        return lattice.LatticeFamily(self.family, self.k)

    def lattice_spec(self, delta=None):
        return lattice.LatticeSpec(self.lattice_family,
                                   self.delta if delta is None else delta)

    def effective_p(self):
        if self.p is not None:
            return self.p
        p_c = lattice.critical_probability(self.lattice_family)
        if p_c is None:
            raise ConfigError(f"p_c of the {self.family} family is unknown, "
                              "p must be given")
        return p_c

    def to_dict(self):
        config_dict = asdict(self)
        for key, value in config_dict.items():
            if isinstance(value, tuple):
                config_dict[key] = json.loads(json.dumps(value))
        return config_dict


def load_config(experiment, config_filepath=None, overrides=None):
    """Effective config: defaults < config file < explicit overrides."""
    config_dict = {}
    if config_filepath is not None:
        try:
            with open(config_filepath) as src:
                config_dict = json.load(src)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(
                f"cannot read config {config_filepath}: {e}") from e
        if not isinstance(config_dict, dict):
            raise ConfigError(f"config {config_filepath} is not an object")
        if config_dict.get('experiment', experiment) != experiment:
            raise ConfigError(
                f"config {config_filepath} is for experiment "
                f"{config_dict['experiment']!r}, not {experiment!r}")
    config_dict['experiment'] = experiment
    config_dict.update({
        key: value
        for key, value in (overrides or {}).items() if value is not None
    })
    return ExperimentConfig.from_dict(config_dict)


@dataclass
class ExperimentResult:
    experiment: str
    rows: pd.DataFrame
    verdict: str
    ok: bool
    notes: list = field(default_factory=list)


def result_row(spec, domain, crossing_estimate, cardy_X, p):
    deviation = crossing_estimate.p_hat - cardy_X
    return {
        'family': spec.family.tag,
        'k': spec.family.k,
        'delta': spec.delta,
        'p': p,
        'x_requested': domain.x_requested,
        'x_snapped': domain.x_snapped,
        'n': crossing_estimate.n,
        'successes': crossing_estimate.successes,
        'p_hat': crossing_estimate.p_hat,
        'ci_low': crossing_estimate.ci_low,
        'ci_high': crossing_estimate.ci_high,
        'cardy_X': cardy_X,
        'deviation': deviation,
        'z_score': deviation /
        ((crossing_estimate.ci_high - crossing_estimate.ci_low) / Z_WIDTH)
    }


def rows_frame(rows, columns=None):
    return pd.DataFrame(rows, columns=columns or RESULT_COLUMNS)


def header_lines(config, result):
    lines = [
        f'cardy-lattices {cardy_lattices.__version__}',
        f'experiment: {result.experiment}', f'rng: {rng.RNG_VERSION}'
    ]
    for key, value in sorted(config.to_dict().items()):
        if key in PROVENANCE_EXCLUDE:
            continue
        lines.append(f'config.{key}: {json.dumps(value)}')
    lines.extend(result.notes)
    lines.append(f'verdict: {result.verdict}')
    return lines


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float(settings.FLOAT_FMT % value)
    return value


def dump_result(config, result, dst_filepath=None):
    """Write the result table with its provenance header.

    CSV carries the header as '#'-prefixed comment lines above the column
    row; JSON mirrors the rows one object per row.
    """
    lines = header_lines(config, result)
    dst = sys.stdout if dst_filepath in (None, '-') else open(
        dst_filepath, 'w', newline='')
    try:
        if config.format == 'json':
            records = [{
                column: _json_value(value)
                for column, value in row.items()
            } for row in result.rows.to_dict(orient='records')]
            json.dump(
                {
                    'provenance': lines,
                    'verdict': result.verdict,
                    'rows': records
                },
                dst,
                indent=2,
                allow_nan=False)
            dst.write('\n')
        else:
            for line in lines:
                dst.write(f'# {line}\n')
            result.rows.to_csv(dst,
                               index=False,
                               float_format=settings.FLOAT_FMT)
    finally:
        if dst is not sys.stdout:
            dst.close()
    if dst_filepath not in (None, '-'):
        logger.info("dumped %d %s rows to %s", len(result.rows),
                    result.experiment, dst_filepath)
