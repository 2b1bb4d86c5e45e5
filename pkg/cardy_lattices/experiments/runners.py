import logging
import math

import numpy as np

from cardy_lattices import conformal, domain, lattice, settings
from cardy_lattices.errors import ConfigError
from cardy_lattices.experiments import utils as exp_utils
from cardy_lattices.percolation import engine

logger = logging.getLogger(__name__)


def simulated_spec(config, delta=None):
    """Lattice on which the configured family is simulated.

    For SquareNE the configured delta is the mesh of the paired T(1/sqrt(2))
    lattice, so the square lattice itself has mesh delta / sqrt(2).
    """
    spec = config.lattice_spec(delta)
    if spec.family.tag == lattice.SQUARE_NE:
        return lattice.LatticeSpec(spec.family, spec.delta * math.sqrt(.5))
    return spec


def predicted_X(spec, x_snapped):
    if spec.family.tag == lattice.SQUARE_NE:
        return conformal.square_ne_prediction(x_snapped).X
    return conformal.cardy_prediction(
        x_snapped, conformal.apex_params(spec.family.shape_k)).X


def _half_width(row):
    return (row['ci_high'] - row['ci_low']) / 2


def finite_delta_tolerance(half_width, delta):
    return (settings.CI_HALF_WIDTHS * half_width +
            settings.FINITE_DELTA_COEF * delta**settings.FINITE_DELTA_EXP)


def _check_family(config, tags, experiment):
    if config.family not in tags:
        raise ConfigError(f"{experiment} does not run on the {config.family} "
                          f"family, expected one of {tags}")


def _estimate_row(spec, x_param, plan, n_jobs, block_size):
    marked = domain.standard_triangle(spec, x_param)
    site_cls = domain.classify(spec, marked)
    crossing_estimate = engine.estimate(site_cls,
                                        plan,
                                        n_jobs=n_jobs,
                                        block_size=block_size)
    return exp_utils.result_row(spec, marked, crossing_estimate,
                                predicted_X(spec, marked.x_snapped), plan.p)


def _cardy_rows(config, spec, p, n_jobs, block_size):
    plan = engine.SamplingPlan(p, config.seed, config.n_samples)
    return [
        _estimate_row(spec, x_param, plan, n_jobs, block_size)
        for x_param in config.x_params
    ]


def _cardy_holds(rows, delta):
    return [
        abs(row['deviation']) <= finite_delta_tolerance(
            _half_width(row), delta) for row in rows
    ]


def run_verify_cardy(config, n_jobs=None, block_size=None):
    if config.family != lattice.TRIANGULAR_K or config.k != 1:
        raise ConfigError("verify-cardy runs on the equilateral lattice "
                          "(family TriangularK with k=1)")
    spec = simulated_spec(config)
    rows = _cardy_rows(config, spec, config.effective_p(), n_jobs, block_size)
    holds = _cardy_holds(rows, spec.delta)
    notes = [
        f"tolerance: {settings.CI_HALF_WIDTHS} CI half-widths + "
        f"{settings.FINITE_DELTA_COEF:g} * delta^"
        f"{settings.FINITE_DELTA_EXP:.6g}"
    ]
    for row, ok in zip(rows, holds):
        logger.info("x=%g: p_hat=%.6f, cardy X=%.6f, %s", row['x_requested'],
                    row['p_hat'], row['cardy_X'],
                    'within tolerance' if ok else 'OUT OF TOLERANCE')
    ok = all(holds)
    return exp_utils.ExperimentResult('verify-cardy',
                                      exp_utils.rows_frame(rows),
                                      exp_utils.PASS if ok else exp_utils.FAIL,
                                      ok, notes)


def coupled_classifications(config, x_param):
    """The two classifications whose crossings coincide sample by sample.

    TriangularK(k): the stretched triangle on T(k) against the equilateral
    triangle on T(1), sharing site indices. SquareNE: the rotated square
    lattice, re-expressed in the index convention of T(1/sqrt(2)), against
    the rotated triangle on T(1/sqrt(2)).
    """
    pair_delta = config.pair_delta
    if pair_delta is None:
        pair_delta = config.delta
    spec_a = simulated_spec(config)
    if spec_a.family.tag == lattice.SQUARE_NE:
        marked_a = domain.standard_triangle(spec_a, x_param)
        cls_a = domain.classify(spec_a, marked_a).reindexed(
            lattice.ROTATION_INDEX_MATRIX)
        spec_b = lattice.LatticeSpec.triangular(lattice.SQUARE_NE_K,
                                                pair_delta)
        marked_b = marked_a.map(lattice.rotation_map())
    else:
        spec_b = lattice.LatticeSpec.triangular(1, pair_delta)
        marked_b = domain.standard_triangle(spec_b, x_param)
        marked_a = marked_b.map(lattice.family_map(spec_a.family.k))
        cls_a = domain.classify(spec_a, marked_a)
    return cls_a, domain.classify(spec_b, marked_b)


def run_coupling(config, n_jobs=None, block_size=None):
    _check_family(config, [lattice.TRIANGULAR_K, lattice.SQUARE_NE],
                  'coupling')
    if config.family == lattice.TRIANGULAR_K and config.k == 1:
        raise ConfigError("coupling requires k != 1 (k = 1 couples the "
                          "equilateral lattice with itself)")
    plan = engine.SamplingPlan(config.effective_p(), config.seed,
                               config.n_samples)
    rows, notes = [], []
    ok = True
    for x_param in config.x_params:
        cls_a, cls_b = coupled_classifications(config, x_param)
        coupled = engine.coupled_estimate(cls_a,
                                          cls_b,
                                          plan,
                                          n_jobs=n_jobs,
                                          block_size=block_size)
        for site_cls, crossing_estimate in ((cls_a, coupled.estimate_a),
                                            (cls_b, coupled.estimate_b)):
            rows.append(
                exp_utils.result_row(
                    site_cls.spec, site_cls.domain, crossing_estimate,
                    predicted_X(site_cls.spec, site_cls.domain.x_snapped),
                    plan.p))
        notes.append(f"agreement x={x_param:g}: "
                     f"{coupled.agreement}/{plan.n_samples}")
        ok = ok and coupled.exact
    return exp_utils.ExperimentResult('coupling', exp_utils.rows_frame(rows),
                                      exp_utils.PASS if ok else exp_utils.FAIL,
                                      ok, notes)


def _sign_law_holds(row, kappa):
    # X > x for kappa > pi/3 and x < 1/2, mirrored for x > 1/2; the measured
    # p_hat tends to x, so the deviation p_hat - X takes the opposite sign
    x = row['x_snapped']
    if x == .5 or math.isclose(kappa, math.pi / 3):
        return True
    expected = np.sign(x - .5) * np.sign(kappa - math.pi / 3)
    return bool(np.sign(row['deviation']) == expected)


def run_violation(config, n_jobs=None, block_size=None):
    _check_family(config, [lattice.TRIANGULAR_K, lattice.SQUARE_NE],
                  'violation')
    p = config.effective_p()
    control_spec = lattice.LatticeSpec.triangular(1, config.delta)
    control_rows = _cardy_rows(config, control_spec, p, n_jobs, block_size)
    control_ok = all(_cardy_holds(control_rows, control_spec.delta))
    notes = [f"control on {control_spec}: "
             f"{'PASS' if control_ok else 'FAIL'}"]
    if config.family == lattice.TRIANGULAR_K and config.k == 1:
        logger.info("k=1 is the equilateral control, no violation to measure")
        return exp_utils.ExperimentResult('violation',
                                          exp_utils.rows_frame(control_rows),
                                          exp_utils.NO_VIOLATION, False, notes)

    spec = simulated_spec(config)
    kappa = (math.pi / 4 if spec.family.tag == lattice.SQUARE_NE else
             conformal.apex_params(spec.family.k))
    rows = _cardy_rows(config, spec, p, n_jobs, block_size)
    significant = []
    for row in rows:
        significant.append(
            abs(row['deviation']) > settings.CI_HALF_WIDTHS *
            _half_width(row))
        significance = 'significant' if significant[-1] else 'not significant'
        sign_law = 'holds' if _sign_law_holds(row, kappa) else 'fails'
        notes.append(f"x={row['x_requested']:g}: deviation "
                     f"{row['deviation']:.6g}, {significance}, "
                     f"sign law {sign_law}")
    confirmed = control_ok and any(significant)
    logger.info("violation on %s (kappa=%.6f): %s", spec, kappa,
                'confirmed' if confirmed else 'not confirmed')
    return exp_utils.ExperimentResult(
        'violation', exp_utils.rows_frame(rows + control_rows),
        exp_utils.CONFIRMS_VIOLATION if confirmed else exp_utils.NO_VIOLATION,
        confirmed, notes)


def run_sweep(config, n_jobs=None, block_size=None):
    _check_family(config, [
        lattice.TRIANGULAR_K, lattice.SQUARE_NE, lattice.TRI_NE,
        lattice.TRI_NW, lattice.TRI_H
    ], 'sweep')
    p_c = lattice.critical_probability(config.lattice_family)
    # finest mesh last
    deltas = sorted(config.deltas, reverse=True)
    rows, notes = [], []
    ok = True
    for p in config.p_values:
        plan = engine.SamplingPlan(p, config.seed, config.n_samples)
        ladders = {x_param: [] for x_param in config.x_params}
        for delta in deltas:
            spec = simulated_spec(config, delta)
            for x_param in config.x_params:
                row = _estimate_row(spec, x_param, plan, n_jobs, block_size)
                rows.append(row)
                ladders[x_param].append(row['p_hat'])
        for x_param, ladder in ladders.items():
            steps = np.diff(ladder)
            label = f"p={p:g}, x={x_param:g}"
            if p_c is None:
                notes.append(f"{label}: exploratory (p_c unknown)")
            elif p == p_c:
                notes.append(
                    f"{label}: heuristic stabilization, successive "
                    f"differences {', '.join(f'{d:.6g}' for d in steps)}")
            else:
                monotone = bool(np.all(steps <= 0) if p < p_c else np.all(
                    steps >= 0))
                direction = 'monotone' if monotone else 'NOT monotone'
                notes.append(
                    f"{label}: {direction} toward {0 if p < p_c else 1}")
                ok = ok and monotone
    return exp_utils.ExperimentResult('sweep', exp_utils.rows_frame(rows),
                                      exp_utils.PASS if ok else exp_utils.FAIL,
                                      ok, notes)


def run_predict(config, n_jobs=None, block_size=None):
    df = conformal.tabulate(config.x_params, config.k_values)
    notes = []
    for k, k_df in df.groupby('k', sort=False):
        notes.append(f"k={k:.12g}: residual in [{k_df['residual'].min():.6g}, "
                     f"{k_df['residual'].max():.6g}]")
    return exp_utils.ExperimentResult('predict', df, exp_utils.PASS, True,
                                      notes)


def run_validate_lattice(config, n_jobs=None, block_size=None):
    spec = config.lattice_spec()
    report = lattice.validate_graph_requirements(spec, config.window_radius,
                                                 config.periods)
    notes = [
        f"failed requirements: {', '.join(report.failures)}"
    ] if report.failures else []
    return exp_utils.ExperimentResult(
        'validate-lattice',
        exp_utils.rows_frame(report.rows(), exp_utils.VALIDATE_COLUMNS),
        exp_utils.PASS if report.satisfied else exp_utils.FAIL,
        report.satisfied, notes)


RUNNERS = {
    'verify-cardy': run_verify_cardy,
    'coupling': run_coupling,
    'violation': run_violation,
    'sweep': run_sweep,
    'predict': run_predict,
    'validate-lattice': run_validate_lattice,
}
