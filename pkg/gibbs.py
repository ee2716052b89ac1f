import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from tqdm.auto import tqdm

from simplex import (Dataset, as_simplex_point, make_rng, named_rng, normalize, sample_uniform_simplex,
                     sample_uniform_subsimplex, subsimplex_contains, subsimplex_point)
from constraint_graph import conditional_theta, eta_from_points, eta_row, is_feasible

logger = logging.getLogger(__name__)

DEFAULT_OMEGA = 0.9
DEFAULT_ITERATIONS = 10000
DEFAULT_BURN_IN = 1000


class DegenerateInitError(ValueError):
    pass


class InvalidRemovalError(ValueError):
    pass


class UnmetChainError(ArithmeticError):

    def __init__(self, unmet, total):
        self.unmet = unmet
        self.total = total
        super().__init__('{} of {} coupled chains did not meet within max_iterations'.format(unmet, total))


@dataclass(frozen=True, eq=False)
class GibbsState:
    '''
    One point of the chain: the dataset, one simplex point per observation (row n of u belongs
    to observation n) and the eta matrix induced by u.
    '''
    dataset: Dataset
    u: np.ndarray
    eta: np.ndarray
    iteration: int = 0

    def same_as(self, other):
        return np.array_equal(self.u, other.u)


@dataclass(frozen=True)
class CouplingConfig:
    omega: float = DEFAULT_OMEGA
    lag: int = 1
    max_iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self):
        if not 0 < self.omega < 1:
            raise ValueError('omega must lie in (0, 1), got {}'.format(self.omega))
        if self.lag < 1 or self.max_iterations < 1:
            raise ValueError('lag and max_iterations must be positive')


@dataclass(frozen=True)
class MeetingRecord:
    meeting_time: Optional[int]
    lag: int

    @property
    def met(self):
        return self.meeting_time is not None


def init(dataset, theta0=None, rng=None):
    '''
    Initial state with u_n drawn uniformly on the sub-simplex Delta_{x_n}(theta0).
    @param dataset: Dataset
    @param theta0: strictly positive simplex point, drawn uniformly on the simplex when None
    @param rng: numpy Generator
    @return: GibbsState
    '''
    rng = make_rng(0) if rng is None else rng
    num_categories = dataset.num_categories
    if theta0 is None:
        theta0 = sample_uniform_simplex(num_categories, rng)
    theta0 = as_simplex_point(theta0, num_categories)
    empty_support = (theta0 <= 0) & (dataset.counts > 0)
    if empty_support.any():
        raise DegenerateInitError('theta0 vanishes on observed categories {}'.format(np.flatnonzero(empty_support)))

    u = np.empty((dataset.size, num_categories))
    for k, index in enumerate(dataset.index_sets):
        if index.size:
            u[index] = sample_uniform_subsimplex(k, theta0, rng, size=index.size)
    return GibbsState(dataset, u, eta_from_points(dataset, u))


def step(state, rng):
    '''
    One systematic sweep over the categories. For each non-empty category k the points of I_k are
    redrawn uniformly on Delta_k(theta) with theta = conditional_theta(eta, k), then row k of eta
    is refreshed.
    @param state: GibbsState
    @param rng: numpy Generator
    @return: new GibbsState
    '''
    u = state.u.copy()
    eta = state.eta.copy()
    for k, index in enumerate(state.dataset.index_sets):
        if not index.size:
            continue
        theta = conditional_theta(eta, k)
        u[index] = sample_uniform_subsimplex(k, theta, rng, size=index.size)
        eta[k] = eta_row(u[index], k)
    return GibbsState(state.dataset, u, eta, state.iteration + 1)


def iterate(state, iterations, rng, progress=False):
    for _ in tqdm(range(iterations), desc='gibbs', disable=not progress):
        state = step(state, rng)
        yield state


def run(dataset, theta0=None, iterations=DEFAULT_ITERATIONS, burn_in=DEFAULT_BURN_IN, rng=None, progress=False):
    '''
    Run the sampler and record the eta matrices after burn-in.
    @param dataset: Dataset
    @param theta0: initial theta, random when None
    @param iterations: total number of sweeps T
    @param burn_in: number of leading sweeps that are not recorded
    @param rng: numpy Generator
    @param progress: show a tqdm bar
    @return: array (T - burn_in, K, K)
    '''
    if iterations <= burn_in or burn_in < 0:
        raise ValueError('need iterations > burn_in >= 0, got {} and {}'.format(iterations, burn_in))
    rng = make_rng(0) if rng is None else rng
    state = init(dataset, theta0, rng)
    trace = np.empty((iterations - burn_in, dataset.num_categories, dataset.num_categories))
    for state in iterate(state, iterations, rng, progress=progress):
        if state.iteration > burn_in:
            trace[state.iteration - burn_in - 1] = state.eta
    logger.info('recorded %d of %d sweeps for counts %s', iterations - burn_in, iterations, dataset.counts.tolist())
    return trace


def extend_state(state, k, point):
    '''
    Append one observation of category k with its point and tighten row k of eta.
    '''
    point = np.asarray(point, dtype=float).reshape(1, -1)
    eta = state.eta.copy()
    eta[k] = np.minimum(eta[k], eta_row(point, k))
    return GibbsState(state.dataset.append(k), np.vstack([state.u, point]), eta, state.iteration)


def add_empty_category(u, rng):
    '''
    Lift points of the K-simplex to the (K+1)-simplex with an extra coordinate that no observation
    uses: w = s u with s ~ Gamma(K, 1) and an independent Exp(1) last entry, then normalize.
    Ratios among the first K coordinates are preserved.
    @param u: array (n, K)
    @param rng: numpy Generator
    @return: array (n, K + 1)
    '''
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n, num_categories = u.shape
    scale = rng.gamma(num_categories, 1.0, size=(n, 1))
    extra = rng.standard_exponential((n, 1))
    return normalize(np.hstack([scale * u, extra]))


def remove_empty_category(u, j, dataset=None):
    '''
    Drop coordinate j and renormalize.
    @param u: array (n, K)
    @param j: category index, must not hold observations
    @param dataset: Dataset used to check that category j is empty
    @return: array (n, K - 1)
    '''
    if dataset is not None and dataset.counts[j] > 0:
        raise InvalidRemovalError('category {} holds {} observations'.format(j, dataset.counts[j]))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    return normalize(np.delete(u, j, axis=1))


def lift_state(state, rng):
    dataset = state.dataset.add_category()
    u = add_empty_category(state.u, rng) if state.u.shape[0] else np.empty((0, dataset.num_categories))
    return GibbsState(dataset, u, eta_from_points(dataset, u), state.iteration)


def reduce_state(state, j):
    if state.dataset.counts[j] > 0:
        raise InvalidRemovalError('category {} holds {} observations'.format(j, state.dataset.counts[j]))
    dataset = state.dataset.remove_category(j)
    u = remove_empty_category(state.u, j) if state.u.shape[0] else np.empty((0, dataset.num_categories))
    return GibbsState(dataset, u, eta_from_points(dataset, u), state.iteration)


def _maximal_coupling(k, theta1, theta2, rng1, rng2):
    '''
    Sample-and-accept maximal coupling of the uniform laws on Delta_k(theta1) and Delta_k(theta2),
    whose densities are 1/theta1_k and 1/theta2_k on their supports.
    '''
    x = sample_uniform_subsimplex(k, theta1, rng1)
    if subsimplex_contains(x, k, theta2) and rng1.uniform(0.0, 1.0 / theta1[k]) <= 1.0 / theta2[k]:
        return x, x.copy()
    while True:
        y = sample_uniform_subsimplex(k, theta2, rng2)
        if not subsimplex_contains(y, k, theta1) or rng2.uniform(0.0, 1.0 / theta2[k]) > 1.0 / theta1[k]:
            return x, y


def coupled_step(s1, s2, cfg, rng1, rng2, rng_common):
    '''
    Coupled sweep of two chains on the same dataset. For each category a shared coin decides
    between common random numbers (probability omega) and per-observation maximal couplings.
    Each chain on its own moves exactly as step, and equal states stay equal.
    @param s1: GibbsState of the first chain
    @param s2: GibbsState of the second chain
    @param cfg: CouplingConfig
    @param rng1: generator of the first chain
    @param rng2: generator of the second chain
    @param rng_common: generator shared by both chains
    @return: tuple of new states
    '''
    u1, u2 = s1.u.copy(), s2.u.copy()
    eta1, eta2 = s1.eta.copy(), s2.eta.copy()
    num_categories = s1.dataset.num_categories
    for k, index in enumerate(s1.dataset.index_sets):
        if not index.size:
            continue
        theta1 = conditional_theta(eta1, k)
        theta2 = conditional_theta(eta2, k)
        if rng_common.uniform() < cfg.omega:
            w = rng_common.standard_exponential((index.size, num_categories))
            u1[index] = subsimplex_point(k, theta1, w)
            u2[index] = subsimplex_point(k, theta2, w)
        else:
            for n in index:
                u1[n], u2[n] = _maximal_coupling(k, theta1, theta2, rng1, rng2)
        eta1[k] = eta_row(u1[index], k)
        eta2[k] = eta_row(u2[index], k)
    return (GibbsState(s1.dataset, u1, eta1, s1.iteration + 1),
            GibbsState(s2.dataset, u2, eta2, s2.iteration + 1))


def sample_meeting_time(dataset, cfg, seed, replicate=0, theta0=None):
    '''
    Lag-L coupled run: the first chain is advanced L sweeps alone, then both chains move jointly
    until X_t equals Y_{t-L}.
    @param dataset: Dataset
    @param cfg: CouplingConfig
    @param seed: base seed
    @param replicate: replicate index, selects independent streams
    @param theta0: initial theta for both chains, random when None
    @return: MeetingRecord
    '''
    rng1 = named_rng(seed, 'coupling', replicate, 0)
    rng2 = named_rng(seed, 'coupling', replicate, 1)
    rng_common = named_rng(seed, 'coupling', replicate, 2)
    x = init(dataset, theta0, rng1)
    y = init(dataset, theta0, rng2)
    for _ in range(cfg.lag):
        x = step(x, rng1)

    t = cfg.lag
    while t < cfg.max_iterations:
        x, y = coupled_step(x, y, cfg, rng1, rng2, rng_common)
        t += 1
        if x.same_as(y):
            logger.debug('replicate %d met at %d', replicate, t)
            return MeetingRecord(t, cfg.lag)
    return MeetingRecord(None, cfg.lag)


def tv_upper_bound(meetings, t):
    '''
    Upper bound on the total variation distance to stationarity after t iterations,
    mean of max(0, ceil((tau - L - t) / L)) over the replicates.
    '''
    unmet = sum(not m.met for m in meetings)
    if unmet:
        raise UnmetChainError(unmet, len(meetings))
    tau = np.array([m.meeting_time for m in meetings], dtype=float)
    lag = np.array([m.lag for m in meetings], dtype=float)
    return float(np.mean(np.maximum(0.0, np.ceil((tau - lag - t) / lag))))


def tv_upper_bound_curve(meetings, horizon=None):
    if not meetings:
        raise ValueError('no meeting records')
    if horizon is None:
        unmet = sum(not m.met for m in meetings)
        if unmet:
            raise UnmetChainError(unmet, len(meetings))
        horizon = max(m.meeting_time - m.lag for m in meetings)
    ts = np.arange(max(horizon, 0) + 1)
    return ts, np.array([tv_upper_bound(meetings, t) for t in ts])


def rejection_sample(dataset, size, rng, batch=1000, max_draws=10_000_000):
    '''
    Exact draws of eta under the target by rejection: u uniform on the product of simplices,
    kept when its feasible set is non-empty.
    @param dataset: Dataset
    @param size: number of accepted configurations
    @param rng: numpy Generator
    @param batch: configurations proposed per round
    @param max_draws: proposal budget
    @return: array (size, K, K)
    '''
    accepted = []
    draws = 0
    while len(accepted) < size:
        if draws >= max_draws:
            raise RuntimeError('rejection sampler accepted {} of {} proposals'.format(len(accepted), draws))
        proposals = sample_uniform_simplex(dataset.num_categories, rng, size=batch * max(dataset.size, 1))
        for u in proposals.reshape(batch, max(dataset.size, 1), dataset.num_categories):
            eta = eta_from_points(dataset, u[:dataset.size])
            if is_feasible(eta):
                accepted.append(eta)
                if len(accepted) == size:
                    break
        draws += batch
    logger.debug('rejection sampler: %d accepted after %d proposals', size, draws)
    return np.array(accepted)
