import logging
import warnings
from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd
from scipy.special import softmax
from tqdm.auto import tqdm

from simplex import TOL, Dataset, InvalidDimensionError, make_rng, sample_uniform_subsimplex
from constraint_graph import conditional_theta, is_feasible, theta_in_feasible, validate_eta
from polytope import DEFAULT_PROBES, AssertionRelation, FeasibleSet, segment_phi_interval
from gibbs import GibbsState, extend_state, init, step
from metrics import table_stats

logger = logging.getLogger(__name__)

DEFAULT_ESS_THRESHOLD = 0.5
DEFAULT_PARTICLES = 1024

# theta(phi) = A phi + b for the genetic linkage model, phi in (0, 1)
LINKAGE_A = np.array([0.25, -0.25, -0.25, 0.25])
LINKAGE_B = np.array([0.5, 0.25, 0.25, 0.0])
PHI_RANGE = (0.0, 1.0)

__all__ = [
    'PqrTriple', 'WeightedEnsemble', 'PriorCombination', 'pqr', 'pqr_from_points', 'pqr_curve', 'combine_eta',
    'combine_traces', 'combine_with_dirichlet_prior', 'conjugate_posterior_sample', 'up_project', 'up_projected_trace',
    'init_ensemble', 'ensemble_pqr', 'systematic_resample', 'sequential_assimilate', 'sequential_pqr', 'linkage_theta',
    'linkage_phi_intervals', 'interval_pqr', 'linkage_phi_pqr', 'dirichlet_dsm_interval', 'dirichlet_dsm_phi',
    'table_stats',
]


class NoSamplesError(ValueError):
    pass


class DegenerateWeightsError(ArithmeticError):
    pass


class StarvationError(ArithmeticError):
    pass


class PriorStarvationWarning(RuntimeWarning):
    pass


class DegenerateProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class PqrTriple:
    '''
    Probabilities for, against and don't know.
    '''
    p: float
    q: float
    r: float

    def __post_init__(self):
        if min(self.p, self.q, self.r) < -TOL or abs(self.p + self.q + self.r - 1.0) > TOL:
            raise ValueError('invalid triple ({}, {}, {})'.format(self.p, self.q, self.r))

    @classmethod
    def from_counts(cls, contained, disjoint, total):
        if total <= 0:
            raise NoSamplesError('cannot form a triple from zero samples')
        p = contained / total
        q = disjoint / total
        return cls(p, q, max(0.0, 1.0 - p - q))

    @classmethod
    def from_weights(cls, relations, weights):
        relations = np.asarray([r.value for r in relations])
        weights = np.asarray(weights, dtype=float)
        p = float(weights[relations == AssertionRelation.CONTAINED.value].sum())
        q = float(weights[relations == AssertionRelation.DISJOINT.value].sum())
        return cls(p, q, max(0.0, 1.0 - p - q))

    @property
    def one_minus_q(self):
        return 1.0 - self.q


def _feasible_sets(trace):
    return [t if isinstance(t, FeasibleSet) else FeasibleSet(t) for t in trace]


def pqr(trace, assertion, num_probes=DEFAULT_PROBES, rng=None):
    '''
    Fractions of trace elements whose feasible set is contained in, disjoint from, or straddles
    the assertion.
    @param trace: eta matrices or FeasibleSet objects
    @param assertion: polytope.Assertion
    @param num_probes: interior probes for nonlinear assertions
    @param rng: generator for the probes
    @return: PqrTriple
    '''
    sets = _feasible_sets(trace)
    if not sets:
        raise NoSamplesError('empty trace')
    rng = make_rng(0) if rng is None else rng
    relations = [s.classify(assertion, num_probes=num_probes, rng=rng) for s in sets]
    contained = sum(r is AssertionRelation.CONTAINED for r in relations)
    disjoint = sum(r is AssertionRelation.DISJOINT for r in relations)
    return PqrTriple.from_counts(contained, disjoint, len(relations))


def pqr_from_points(thetas, assertion):
    # singletons never straddle
    thetas = np.atleast_2d(thetas)
    if thetas.shape[0] == 0:
        raise NoSamplesError('no retained draws')
    contained = int(np.sum(assertion(thetas) >= -TOL))
    return PqrTriple.from_counts(contained, thetas.shape[0] - contained, thetas.shape[0])


def pqr_curve(trace, family, grid, label=None, num_probes=DEFAULT_PROBES, rng=None):
    '''
    Triples for a family of assertions indexed by c, vertices are enumerated once per trace element.
    @param trace: eta matrices or FeasibleSet objects
    @param family: callable mapping c to an Assertion
    @param grid: values of c
    @param label: value of the assertion column
    @return: DataFrame with columns assertion, c, p, q, r
    '''
    sets = _feasible_sets(trace)
    rng = make_rng(0) if rng is None else rng
    rows = []
    for c in grid:
        assertion = family(c)
        triple = pqr(sets, assertion, num_probes=num_probes, rng=rng)
        rows.append({'assertion': label or assertion.name, 'c': float(c), 'p': triple.p, 'q': triple.q, 'r': triple.r})
    return pd.DataFrame(rows, columns=['assertion', 'c', 'p', 'q', 'r'])


def combine_eta(a, b):
    '''
    Intersection of two feasible sets: entrywise minimum of the eta matrices, None when empty.
    '''
    a = validate_eta(a)
    b = validate_eta(b)
    if a.shape != b.shape:
        raise InvalidDimensionError('cannot combine K={} with K={}'.format(a.shape[0], b.shape[0]))
    combined = np.minimum(a, b)
    return combined if is_feasible(combined) else None


def combine_traces(trace_a, trace_b, rng):
    '''
    Dempster combination of two independent random sets given as traces. Elements are paired at
    random and pairs with an empty intersection are discarded.
    @return: tuple of combined eta array and retention rate
    '''
    size = min(len(trace_a), len(trace_b))
    if size == 0:
        raise NoSamplesError('empty trace')
    partners = rng.permutation(len(trace_b))[:size]
    combined = [combine_eta(trace_a[i], trace_b[j]) for i, j in zip(range(size), partners)]
    kept = [c for c in combined if c is not None]
    rate = len(kept) / size
    logger.info('combination retained %d of %d pairs', len(kept), size)
    if not kept:
        return np.zeros((0,) + np.shape(trace_a[0])), rate
    return np.array(kept), rate


@dataclass
class PriorCombination:
    thetas: np.ndarray
    retention_rate: float
    proposals: int


def conjugate_posterior_sample(counts, alpha, size, rng):
    return rng.dirichlet(np.asarray(alpha, dtype=float) + np.asarray(counts, dtype=float), size=size)


def combine_with_dirichlet_prior(trace, alpha, rng, draws_per_element=1):
    '''
    Combine the random sets of a trace with a Dirichlet prior viewed as random singletons:
    prior draws falling inside the paired feasible set are retained.
    @param trace: eta matrices
    @param alpha: strictly positive Dirichlet parameters
    @param rng: numpy Generator
    @param draws_per_element: prior draws per trace element
    @return: PriorCombination
    '''
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError('alpha must be strictly positive, got {}'.format(alpha))
    trace = list(trace)
    if not trace:
        raise NoSamplesError('empty trace')

    retained = []
    for eta in trace:
        for theta in rng.dirichlet(alpha, size=draws_per_element):
            if theta_in_feasible(eta, theta):
                retained.append(theta)
    proposals = len(trace) * draws_per_element
    rate = len(retained) / proposals
    if not retained:
        warnings.warn('no prior draw out of {} fell inside its feasible set (alpha={}, K={})'.format(
            proposals, alpha.tolist(), alpha.shape[0]), PriorStarvationWarning)
    thetas = np.array(retained).reshape(-1, alpha.shape[0])
    return PriorCombination(thetas, rate, proposals)


def up_project(partial_theta, num_categories, indices=(0, 1)):
    '''
    Minimal extension of a distribution on two categories to K categories: the two reciprocal
    ratios are fixed and every other constraint is vacuous.
    @param partial_theta: pair (theta_i, theta_j) summing to one
    @param num_categories: K
    @param indices: positions (i, j) of the pair
    @return: eta matrix
    '''
    partial_theta = np.asarray(partial_theta, dtype=float)
    if partial_theta.shape != (2,) or abs(partial_theta.sum() - 1.0) > 1e-9:
        raise ValueError('expected a pair summing to one, got {}'.format(partial_theta))
    if np.any(partial_theta <= 0):
        raise DegenerateProjectionError('up-projection needs strictly positive coordinates, got {}'.format(partial_theta))
    i, j = indices
    eta = np.full((num_categories, num_categories), np.inf)
    np.fill_diagonal(eta, 1.0)
    eta[i, j] = partial_theta[1] / partial_theta[0]
    eta[j, i] = partial_theta[0] / partial_theta[1]
    return eta


def up_projected_trace(counts, alpha, num_categories, size, rng, indices=(0, 1)):
    pairs = conjugate_posterior_sample(counts, alpha, size, rng)
    return np.array([up_project(pair, num_categories, indices) for pair in pairs])


@dataclass
class WeightedEnsemble:
    particles: List[GibbsState]
    log_weights: np.ndarray

    @property
    def dataset(self):
        return self.particles[0].dataset

    @property
    def weights(self):
        if not np.isfinite(self.log_weights).any():
            raise DegenerateWeightsError('all particle weights are zero')
        return softmax(self.log_weights)

    @property
    def ess(self):
        return float(1.0 / np.sum(self.weights ** 2))

    def __len__(self):
        return len(self.particles)


def init_ensemble(dataset, num_particles, rng, theta0=None, burn_in=0):
    '''
    Equally weighted particles for a dataset, each initialized independently and moved burn_in sweeps.
    '''
    particles = []
    for _ in range(num_particles):
        state = init(dataset, theta0, rng)
        for _ in range(burn_in):
            state = step(state, rng)
        particles.append(state)
    return WeightedEnsemble(particles, np.zeros(num_particles))


def ensemble_pqr(ensemble, assertion, num_probes=DEFAULT_PROBES, rng=None):
    rng = make_rng(0) if rng is None else rng
    relations = [FeasibleSet(p.eta).classify(assertion, num_probes=num_probes, rng=rng) for p in ensemble.particles]
    return PqrTriple.from_weights(relations, ensemble.weights)


def systematic_resample(weights, rng):
    weights = np.asarray(weights, dtype=float)
    n = weights.shape[0]
    positions = (rng.uniform() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side='right')


def sequential_assimilate(ensemble, k, rng, ess_threshold=DEFAULT_ESS_THRESHOLD):
    '''
    Importance step for one new observation of category k followed, when the effective sample size
    drops below ess_threshold * n, by systematic resampling and one Gibbs sweep per particle.
    @param ensemble: WeightedEnsemble for the current data
    @param k: category of the new observation
    @param rng: numpy Generator
    @param ess_threshold: fraction of the particle count
    @return: WeightedEnsemble for the extended data
    '''
    particles = []
    increments = np.empty(len(ensemble))
    for i, state in enumerate(ensemble.particles):
        theta = conditional_theta(state.eta, k)
        increments[i] = np.log(theta[k])
        particles.append(extend_state(state, k, sample_uniform_subsimplex(k, theta, rng)))

    log_weights = ensemble.log_weights + increments
    if not np.isfinite(log_weights).any():
        raise DegenerateWeightsError('every particle has zero weight after observation {}'.format(k))
    updated = WeightedEnsemble(particles, log_weights)

    if updated.ess < ess_threshold * len(updated):
        logger.debug('ess %.1f below threshold, resampling %d particles', updated.ess, len(updated))
        index = systematic_resample(updated.weights, rng)
        moved = [step(particles[i], rng) for i in index]
        updated = WeightedEnsemble(moved, np.zeros(len(moved)))
    return updated


def sequential_pqr(observations, num_categories, assertion, num_particles=DEFAULT_PARTICLES, rng=None,
                   ess_threshold=DEFAULT_ESS_THRESHOLD, num_probes=DEFAULT_PROBES, progress=False, return_ensemble=False):
    '''
    Assimilate observations one at a time from the vacuous state and track (p, 1 - q) for an assertion.
    @param observations: 0-based category labels in arrival order
    @param num_categories: K
    @param assertion: polytope.Assertion
    @param return_ensemble: also return the final WeightedEnsemble
    @return: DataFrame with columns n, p, one_minus_q (row n=0 is the vacuous start)
    '''
    rng = make_rng(0) if rng is None else rng
    ensemble = init_ensemble(Dataset(num_categories), num_particles, rng)
    triple = ensemble_pqr(ensemble, assertion, num_probes=num_probes, rng=rng)
    rows = [{'n': 0, 'p': triple.p, 'one_minus_q': triple.one_minus_q}]
    for n, k in enumerate(tqdm(observations, desc='assimilate', disable=not progress), start=1):
        ensemble = sequential_assimilate(ensemble, int(k), rng, ess_threshold=ess_threshold)
        triple = ensemble_pqr(ensemble, assertion, num_probes=num_probes, rng=rng)
        rows.append({'n': n, 'p': triple.p, 'one_minus_q': triple.one_minus_q})
    frame = pd.DataFrame(rows, columns=['n', 'p', 'one_minus_q'])
    return (frame, ensemble) if return_ensemble else frame


def linkage_theta(phi):
    return np.multiply.outer(phi, LINKAGE_A) + LINKAGE_B


def linkage_phi_intervals(trace):
    '''
    Range of phi for which the linkage point lies in each feasible set.
    @return: array (n, 2), rows of NaN where the segment misses the set
    '''
    intervals = np.full((len(trace), 2), np.nan)
    for i, eta in enumerate(trace):
        interval = segment_phi_interval(eta, LINKAGE_A, LINKAGE_B, PHI_RANGE)
        if interval is not None:
            intervals[i] = interval
    return intervals


def interval_pqr(intervals, c_grid):
    '''
    Lower and upper cdf of phi from random intervals: for the assertion phi < c an interval is
    contained when its upper end is below c and disjoint when its lower end is at least c.
    @param intervals: array (n, 2) with NaN rows for absent intervals
    @param c_grid: values of c
    @return: DataFrame with columns c, p, q, r
    '''
    intervals = np.asarray(intervals, dtype=float).reshape(-1, 2)
    retained = intervals[~np.isnan(intervals).any(axis=1)]
    if retained.shape[0] == 0:
        raise StarvationError('no interval intersects the parameter range')
    low, high = retained[:, 0], retained[:, 1]
    rows = []
    for c in c_grid:
        # the parameter range is open, an upper end at its boundary is never attained
        contained = (high < c) | ((c >= PHI_RANGE[1]) & (high <= c))
        disjoint = low >= c
        triple = PqrTriple.from_counts(int(contained.sum()), int(disjoint.sum()), retained.shape[0])
        rows.append({'c': float(c), 'p': triple.p, 'q': triple.q, 'r': triple.r})
    return pd.DataFrame(rows, columns=['c', 'p', 'q', 'r'])


def linkage_phi_pqr(trace, c_grid):
    intervals = linkage_phi_intervals(trace)
    retention_rate = float(np.mean(~np.isnan(intervals[:, 0]))) if len(trace) else 0.0
    logger.info('linkage segment retained in %.2f%% of the trace', 100 * retention_rate)
    return interval_pqr(intervals, c_grid), retention_rate


def dirichlet_dsm_interval(z):
    '''
    Interval [max(4 z_1 - 2, 4 z_4), min(1 - 4 z_2, 1 - 4 z_3)] clipped to (0, 1) for
    z = (z_0, z_1, .., z_4), NaN where it is inverted. Accepts one z or an (n, 5) array.
    '''
    z = np.atleast_2d(np.asarray(z, dtype=float))
    low = np.maximum(4 * z[:, 1] - 2, 4 * z[:, 4])
    high = np.minimum(1 - 4 * z[:, 2], 1 - 4 * z[:, 3])
    low = np.maximum(low, PHI_RANGE[0])
    high = np.minimum(high, PHI_RANGE[1])
    intervals = np.column_stack([low, high])
    intervals[low > high] = np.nan
    return intervals


def dirichlet_dsm_phi(counts, draws, rng):
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (4,):
        raise InvalidDimensionError('the linkage model has four categories, got {}'.format(counts.shape))
    if np.any(counts <= 0):
        raise ValueError('Dirichlet-DSM needs positive counts, got {}'.format(counts))
    z = rng.dirichlet(np.concatenate([[1.0], counts]), size=draws)
    return dirichlet_dsm_interval(z)
