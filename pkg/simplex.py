import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln, xlogy

logger = logging.getLogger(__name__)

TOL = 1e-12

# stream ids for the named generators derived from a single seed
STREAMS = {
    'gibbs': 0,
    'probes': 1,
    'prior': 2,
    'dsm': 3,
    'coupling': 4,
    'smc': 5,
    'bench': 6,
}


class InvalidDimensionError(ValueError):
    pass


class DegenerateSubsimplexError(ArithmeticError):
    pass


def make_rng(seed, *stream):
    '''
    Create a reproducible generator for a (seed, stream id) pair.
    @param seed: non-negative integer seed
    @param stream: one or more integer stream ids
    @return: numpy Generator, identical draw sequence for identical arguments
    '''
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))))


def named_rng(seed, name, *stream):
    return make_rng(seed, STREAMS[name], *stream)


def normalize(x):
    '''
    Project non-negative vectors (or rows of a matrix) back onto the simplex.
    @param x: array of shape (K,) or (n, K)
    @return: array of the same shape whose last axis sums to one
    '''
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    total = x.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError('cannot normalize a zero vector')
    return x / total


def as_simplex_point(theta, num_categories=None):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1 or theta.shape[0] < 2:
        raise InvalidDimensionError('simplex points need at least two coordinates, got shape {}'.format(theta.shape))
    if num_categories is not None and theta.shape[0] != num_categories:
        raise InvalidDimensionError('expected {} coordinates, got {}'.format(num_categories, theta.shape[0]))
    if np.any(theta < -TOL) or abs(theta.sum() - 1.0) > 1e-9:
        raise ValueError('not a point of the simplex: {}'.format(theta))
    return normalize(theta)


def simplex_from_exponentials(w):
    return normalize(w)


def sample_uniform_simplex(num_categories, rng, size=None):
    '''
    Draw uniformly on the simplex by normalizing unit exponentials.
    @param num_categories: K, at least 2
    @param rng: numpy Generator
    @param size: number of points, None for a single point
    @return: array of shape (K,) or (size, K)
    '''
    if num_categories < 2:
        raise InvalidDimensionError('K must be at least 2, got {}'.format(num_categories))
    shape = num_categories if size is None else (size, num_categories)
    return simplex_from_exponentials(rng.standard_exponential(shape))


def subsimplex_point(k, theta, w):
    '''
    Map barycentric weights w to the sub-simplex whose k-th vertex is replaced by theta:
    u_k = w_k theta_k and u_l = w_k theta_l + w_l.
    @param k: category index (0-based)
    @param theta: simplex point
    @param w: weights of shape (K,) or (n, K), normalized here
    @return: points of the same shape as w
    '''
    w = normalize(w)
    u = w[..., k:k + 1] * theta + w
    u[..., k] = w[..., k] * theta[k]
    return normalize(u)


def sample_uniform_subsimplex(k, theta, rng, size=None):
    theta = np.asarray(theta, dtype=float)
    if theta[k] <= 0:
        raise DegenerateSubsimplexError('sub-simplex {} has zero volume for theta={}'.format(k, theta))
    shape = theta.shape[0] if size is None else (size, theta.shape[0])
    return subsimplex_point(k, theta, rng.standard_exponential(shape))


def subsimplex_contains(u, k, theta, tol=TOL):
    '''
    Membership test u in Delta_k(theta) in cross-multiplied form: u_l theta_k >= theta_l u_k for all l.
    Accepts a single point or a matrix of points (one per row).
    '''
    u = np.asarray(u, dtype=float)
    theta = np.asarray(theta, dtype=float)
    inside = u * theta[k] >= theta * u[..., k:k + 1] - tol
    return np.all(inside, axis=-1)


def subsimplex_index(u, theta):
    '''
    Category produced by the sampling mechanism for u, ties broken by the smallest index.
    @param u: a point or rows of points
    @param theta: strictly positive simplex point
    @return: int, or integer array for several points
    '''
    u = np.asarray(u, dtype=float)
    theta = np.asarray(theta, dtype=float)
    hits = np.stack([subsimplex_contains(u, k, theta) for k in range(theta.shape[0])], axis=-1)
    index = np.argmax(hits, axis=-1)
    return int(index) if np.ndim(index) == 0 else index


def multinomial_pmf(counts, theta):
    counts = np.asarray(counts, dtype=float)
    theta = np.asarray(theta, dtype=float)
    log_pmf = gammaln(counts.sum() + 1) - gammaln(counts + 1).sum() + xlogy(counts, theta).sum()
    return float(np.exp(log_pmf))


@dataclass(frozen=True, eq=False)
class Dataset:
    '''
    Observations x_1..x_N with 0-based labels in [0, K).
    '''
    num_categories: int
    observations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        if self.num_categories < 2:
            raise InvalidDimensionError('K must be at least 2, got {}'.format(self.num_categories))
        observations = np.array(self.observations, dtype=int).reshape(-1)
        if observations.size and (observations.min() < 0 or observations.max() >= self.num_categories):
            raise ValueError('labels must lie in [0, {}), got {}'.format(self.num_categories, observations))
        observations.setflags(write=False)
        object.__setattr__(self, 'observations', observations)

    @classmethod
    def from_counts(cls, counts):
        counts = np.asarray(counts, dtype=int)
        if np.any(counts < 0):
            raise ValueError('counts must be non-negative, got {}'.format(counts))
        return cls(len(counts), np.repeat(np.arange(len(counts)), counts))

    @property
    def size(self):
        return int(self.observations.shape[0])

    @cached_property
    def counts(self):
        return np.bincount(self.observations, minlength=self.num_categories)

    @cached_property
    def index_sets(self):
        return [np.flatnonzero(self.observations == k) for k in range(self.num_categories)]

    def append(self, k):
        return Dataset(self.num_categories, np.append(self.observations, k))

    def add_category(self):
        return Dataset(self.num_categories + 1, self.observations)

    def remove_category(self, j):
        if self.counts[j] > 0:
            raise ValueError('category {} holds {} observations'.format(j, self.counts[j]))
        observations = self.observations - (self.observations > j)
        return Dataset(self.num_categories - 1, observations)
