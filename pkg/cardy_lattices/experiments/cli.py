import logging
import sys

import click
import dotenv

from cardy_lattices import lattice, settings
from cardy_lattices.errors import (ConfigError, DiscretizationError,
                                   DomainError, PreconditionError)
from cardy_lattices.experiments import runners
from cardy_lattices.experiments import utils as exp_utils

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_VERDICT = 4


def _single(name, values):
    if len(values) > 1:
        raise ConfigError(f"--{name} takes a single value for this "
                          "experiment")
    return values[0] if values else None


def _overrides(experiment, family, k, delta, x, p, n, seed, out, fmt,
               window_radius, pair_delta):
    overrides = {
        'family': family,
        'n_samples': n,
        'seed': seed,
        'out': out,
        'format': fmt,
        'window_radius': window_radius,
        'pair_delta': pair_delta,
        'x_params': list(x) or None
    }
    if experiment == 'predict':
        overrides['k_values'] = list(k) or None
    else:
        overrides['k'] = _single('k', k)
    if experiment == 'sweep':
        overrides.update(deltas=list(delta) or None, p_values=list(p) or None)
    else:
        overrides.update(delta=_single('delta', delta), p=_single('p', p))
    return overrides


def experiment_options(func):
    options = [
        click.option('--config',
                     'config_filepath',
                     type=click.Path(exists=True, dir_okay=False),
                     help='JSON config file, overridden by the flags below.'),
        click.option('--family',
                     type=click.Choice(lattice.FAMILY_TAGS)),
        click.option('--k', type=float, multiple=True),
        click.option('--delta', type=float, multiple=True),
        click.option('--x', type=float, multiple=True),
        click.option('--p', type=float, multiple=True),
        click.option('--n', type=int),
        click.option('--seed', type=int),
        click.option('--out', type=click.Path(dir_okay=False)),
        click.option('--format', 'fmt', type=click.Choice(exp_utils.FORMATS)),
        click.option('--window-radius', type=int),
        click.option('--pair-delta', type=float),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def run_experiment(ctx, experiment, config_filepath, **flags):
    logger = logging.getLogger(__name__)
    try:
        config = exp_utils.load_config(experiment, config_filepath,
                                       _overrides(experiment, **flags))
    except (ConfigError, DomainError, DiscretizationError) as e:
        logger.error("invalid config: %s", e)
        sys.exit(EXIT_CONFIG)

    try:
        result = runners.RUNNERS[experiment](
            config,
            n_jobs=ctx.obj['n_jobs'],
            block_size=ctx.obj['block_size'])
    except PreconditionError as e:
        logger.error("precondition failed at site %s: %s", e.site, e.reason)
        sys.exit(EXIT_PRECONDITION)
    except (ConfigError, DomainError, DiscretizationError) as e:
        logger.exception("cannot run %s: %s", experiment, e)
        sys.exit(EXIT_CONFIG)

    exp_utils.dump_result(config, result, config.out)
    logger.info("%s verdict: %s", experiment, result.verdict)
    sys.exit(EXIT_OK if result.ok else EXIT_VERDICT)


@click.group()
@click.option('--verbose', '-v', is_flag=True)
@click.option('--quiet', '-q', is_flag=True)
@click.option('--n-jobs',
              type=int,
              default=settings.DEFAULT_N_JOBS,
              envvar='CARDY_LATTICES_N_JOBS',
              show_default=True)
@click.option('--block-size',
              type=int,
              default=settings.DEFAULT_BLOCK_SIZE,
              envvar='CARDY_LATTICES_BLOCK_SIZE',
              show_default=True)
@click.pass_context
def cli(ctx, verbose, quiet, n_jobs, block_size):
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format=settings.DEFAULT_LOG_FMT)
    if block_size < 1:
        raise click.BadParameter('must be positive', param_hint='block-size')
    ctx.obj = {'n_jobs': n_jobs, 'block_size': block_size}


def experiment_command(experiment, help_text):
    @click.command(experiment, help=help_text)
    @experiment_options
    @click.pass_context
    def command(ctx, config_filepath, **flags):
        run_experiment(ctx, experiment, config_filepath, **flags)

    return command


for experiment, help_text in [
    ('verify-cardy', 'Crossing estimates on the equilateral lattice.'),
    ('coupling', 'Per-sample coupling of two equivalent lattices.'),
    ('violation', 'Crossing estimates against the conformal prediction.'),
    ('sweep', 'Estimates over a (p, delta) grid.'),
    ('predict', 'Tabulate the conformal prediction, no simulation.'),
    ('validate-lattice', 'Check the graph requirements of a lattice.'),
]:
    cli.add_command(experiment_command(experiment, help_text))


def main():
    # load up the .env entries as environment variables
    dotenv.load_dotenv(dotenv.find_dotenv(usecwd=True))

    cli()


if __name__ == '__main__':
    main()
