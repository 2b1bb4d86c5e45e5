import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from joblib import Parallel, delayed
from scipy import ndimage as ndi
from tqdm import tqdm

from cardy_lattices import domain, settings
from cardy_lattices.errors import (DiscretizationError, DomainError,
                                   PreconditionError)
from cardy_lattices.percolation import rng
from cardy_lattices.percolation import utils as perc_utils

# exhaustive enumeration is limited to 2**20 configurations
MAX_ENUMERATION_SITES = 20
ENUMERATION_BLOCK = 2**14

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingPlan:
    p: float
    seed: int
    n_samples: int

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise DomainError(f"p must lie in [0, 1], got {self.p!r}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise DomainError(
                "n_samples must be a positive integer, got "
                f"{self.n_samples!r}")
        object.__setattr__(self, 'seed', int(self.seed) % 2**64)
        object.__setattr__(self, 'n_samples', int(self.n_samples))

    def to_dict(self):
        return {'p': self.p, 'seed': self.seed, 'n_samples': self.n_samples}


@dataclass(frozen=True)
class CrossingEstimate:
    n: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    provenance: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_counts(cls, successes, n, provenance=None):
        ci_low, ci_high = perc_utils.wilson_interval(successes, n)
        return cls(n=n,
                   successes=successes,
                   p_hat=successes / n,
                   ci_low=ci_low,
                   ci_high=ci_high,
                   provenance=provenance or {})

    @property
    def half_width(self):
        return (self.ci_high - self.ci_low) / 2


@dataclass(frozen=True)
class CoupledEstimate:
    indicators_a: np.ndarray
    indicators_b: np.ndarray
    estimate_a: CrossingEstimate
    estimate_b: CrossingEstimate

    @property
    def agreement(self):
        return int(np.count_nonzero(self.indicators_a == self.indicators_b))

    @property
    def exact(self):
        return self.agreement == len(self.indicators_a)


@dataclass(frozen=True, eq=False)
class CrossingProblem:
    """Dense-grid form of a classification, ready for batched labeling."""
    shape: tuple
    rows: np.ndarray
    cols: np.ndarray
    site_keys: np.ndarray
    ax: np.ndarray
    bc: np.ndarray
    structure: np.ndarray

    @classmethod
    def from_classification(cls, site_cls):
        sites = site_cls.sites
        origin = sites.min(axis=0)
        shape = tuple(int(s) for s in sites.max(axis=0) - origin + 1)
        # neighbors within a sample only: the leading (sample) axis of the
        # structuring element is empty except for its middle plane
        structure = np.zeros((3, 3, 3), dtype=bool)
        structure[1, 1, 1] = True
        for di, dj in site_cls.offsets:
            if max(abs(di), abs(dj)) > 1:
                raise DomainError(
                    f"offset {(di, dj)} does not fit a 3x3 neighborhood")
            structure[1, 1 + di, 1 + dj] = True
        return cls(shape=shape,
                   rows=sites[:, 0] - origin[0],
                   cols=sites[:, 1] - origin[1],
                   site_keys=rng.site_keys(sites),
                   ax=np.flatnonzero(site_cls.labels == domain.AX),
                   bc=np.flatnonzero(site_cls.labels == domain.BC),
                   structure=structure)

    def crossings(self, open_arr):
        """Crossing indicator of each row of an `(n, m)` open-site array."""
        n_configs = len(open_arr)
        if not len(self.ax) or not len(self.bc):
            return np.zeros(n_configs, dtype=bool)
        stack = np.zeros((n_configs, ) + self.shape, dtype=bool)
        stack[:, self.rows, self.cols] = open_arr
        # labels are unique across the whole stack, hence across samples
        labels, n_labels = ndi.label(stack, structure=self.structure)
        on_ax = labels[:, self.rows[self.ax], self.cols[self.ax]]
        on_bc = labels[:, self.rows[self.bc], self.cols[self.bc]]
        touches_ax = np.zeros(n_labels + 1, dtype=bool)
        touches_ax[on_ax.ravel()] = True
        # label 0 is the closed background
        touches_ax[0] = False
        return touches_ax[on_bc].any(axis=1)

    def indicators(self, p, seed, sample_indices):
        u = rng.uniforms(rng.sample_keys(seed, sample_indices),
                         self.site_keys)
        return self.crossings(u < p)


def _problem(site_cls):
    if isinstance(site_cls, CrossingProblem):
        return site_cls
    return CrossingProblem.from_classification(site_cls)


def crossing_indicators(site_cls, p, seed, sample_indices):
    """Crossing indicators for a block of sample indices.

    A site is open iff its uniform is below `p`, so for a fixed seed the open
    set grows with `p`.
    """
    return _problem(site_cls).indicators(p, seed,
                                         np.asarray(sample_indices))


def sample_crossing(site_cls, p, seed, sample_idx):
    return bool(crossing_indicators(site_cls, p, seed, [sample_idx])[0])


def _block_indicators(problem, p, seed, start, stop):
    return problem.indicators(p, seed, np.arange(start, stop))


def _run_blocks(problems, plan, n_jobs, block_size, desc):
    if block_size is None:
        block_size = settings.DEFAULT_BLOCK_SIZE
    if n_jobs is None:
        n_jobs = settings.DEFAULT_N_JOBS
    blocks = perc_utils.split_blocks(plan.n_samples, block_size)
    # joblib returns results in submission order whatever the worker count
    results = Parallel(n_jobs=n_jobs)(
        delayed(_block_indicators)(problem, plan.p, plan.seed, start, stop)
        for start, stop in tqdm(blocks, desc=desc, disable=None)
        for problem in problems)
    n_problems = len(problems)
    return [
        np.concatenate(results[i::n_problems]) for i in range(n_problems)
    ]


def _provenance(site_cls, plan):
    return {
        'spec': site_cls.spec.to_dict(),
        'domain': site_cls.summary(),
        'plan': plan.to_dict(),
        'rng': rng.RNG_VERSION
    }


def estimate(site_cls, plan, n_jobs=None, block_size=None):
    """Monte Carlo estimate of the crossing probability.

    The sample range is cut into blocks run by a joblib worker pool; only the
    summed success count leaves a block, so the estimate does not depend on
    `n_jobs` or `block_size`.
    """
    indicators, = _run_blocks([_problem(site_cls)], plan, n_jobs, block_size,
                              'crossings')
    successes = int(np.count_nonzero(indicators))
    crossing_estimate = CrossingEstimate.from_counts(
        successes, plan.n_samples, _provenance(site_cls, plan))
    logger.info("estimated crossing probability %.6f [%.6f, %.6f] on %s "
                "(%d sites, p=%g, n=%d)", crossing_estimate.p_hat,
                crossing_estimate.ci_low, crossing_estimate.ci_high,
                site_cls.spec, len(site_cls), plan.p, plan.n_samples)
    return crossing_estimate


def coupled_estimate(cls_a, cls_b, plan, n_jobs=None, block_size=None):
    """Run two classifications on the same per-site uniforms.

    Uniforms are keyed by site indices, so classifications with identical
    sites, labels and adjacency see identical configurations and must agree
    sample by sample.
    """
    difference = cls_a.first_difference(cls_b)
    if difference is not None:
        site, reason = difference
        raise PreconditionError(
            f"coupled classifications differ at site {tuple(site)}: "
            f"{reason}",
            site=site,
            reason=reason)
    indicators_a, indicators_b = _run_blocks([_problem(cls_a),
                                              _problem(cls_b)], plan, n_jobs,
                                             block_size, 'coupled crossings')
    coupled = CoupledEstimate(
        indicators_a, indicators_b,
        CrossingEstimate.from_counts(int(np.count_nonzero(indicators_a)),
                                     plan.n_samples,
                                     _provenance(cls_a, plan)),
        CrossingEstimate.from_counts(int(np.count_nonzero(indicators_b)),
                                     plan.n_samples,
                                     _provenance(cls_b, plan)))
    logger.info("coupled %s and %s: %d of %d samples agree", cls_a.spec,
                cls_b.spec, coupled.agreement, plan.n_samples)
    return coupled


def crossing_counts_by_open_sites(site_cls):
    """Number of crossing configurations with exactly `r` open sites, by `r`.

    Enumerates all `2**m` configurations of the `m` in-domain sites.
    """
    m = len(site_cls)
    if m > MAX_ENUMERATION_SITES:
        raise DiscretizationError(
            f"exhaustive enumeration is limited to {MAX_ENUMERATION_SITES} "
            f"sites, the classification has {m}")
    problem = _problem(site_cls)
    bits = np.arange(m, dtype=np.int64)
    counts = np.zeros(m + 1, dtype=np.int64)
    for start, stop in perc_utils.split_blocks(2**m, ENUMERATION_BLOCK):
        configs = np.arange(start, stop, dtype=np.int64)
        open_arr = (configs[:, None] >> bits[None, :]) & 1 == 1
        crossing = problem.crossings(open_arr)
        counts += np.bincount(open_arr[crossing].sum(axis=1),
                              minlength=m + 1)
    return [int(count) for count in counts]


def exact_crossing_probability(site_cls, p):
    """Exact crossing probability at density `p`.

    Exact for `fractions.Fraction` (or int) `p`; a float otherwise.
    """
    counts = crossing_counts_by_open_sites(site_cls)
    m = len(counts) - 1
    if isinstance(p, (Fraction, int)):
        p = Fraction(p)
        return sum(count * p**r * (1 - p)**(m - r)
                   for r, count in enumerate(counts))
    return math.fsum(count * p**r * (1 - p)**(m - r)
                     for r, count in enumerate(counts))
