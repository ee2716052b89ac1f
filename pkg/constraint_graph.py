import logging
from itertools import permutations

import numpy as np
from scipy.special import softmax

from simplex import TOL, InvalidDimensionError

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12
MAX_BRUTE_FORCE_K = 8


class DegenerateRatioError(ArithmeticError):
    pass


class SizeError(ValueError):
    pass


class NegativeCycleError(ArithmeticError):
    '''
    Raised when the log-ratio digraph holds a negative cycle, i.e. the feasible set is empty.
    @param cycle: node sequence of a witness cycle (may be empty if it could not be retraced)
    @param value: total log weight of the witness cycle
    '''

    def __init__(self, cycle, value=float('nan')):
        self.cycle = list(cycle)
        self.value = value
        super().__init__('negative cycle {} with value {:.3e}'.format(self.cycle, value))


def vacuous_eta(num_categories):
    eta = np.full((num_categories, num_categories), np.inf)
    np.fill_diagonal(eta, 1.0)
    return eta


def validate_eta(eta):
    eta = np.asarray(eta, dtype=float)
    if eta.ndim != 2 or eta.shape[0] != eta.shape[1] or eta.shape[0] < 2:
        raise InvalidDimensionError('eta must be a square matrix with K >= 2, got shape {}'.format(eta.shape))
    if np.any(np.isnan(eta)) or np.any(eta <= 0):
        raise ValueError('eta entries must be positive')
    if not np.allclose(np.diag(eta), 1.0):
        raise ValueError('eta must have a unit diagonal')
    return eta


def log_weights(eta):
    # +inf stays +inf: vacuous constraints are edges that never relax
    return np.log(np.asarray(eta, dtype=float))


def eta_row(points, k):
    '''
    Minimal coordinate ratios u_l / u_k over the points of one category.
    @param points: array (n, K) of points attached to category k, n >= 1
    @param k: category index
    @return: row eta_{k->.} of length K
    '''
    denominators = points[:, k]
    if np.any(denominators <= 0):
        raise DegenerateRatioError('point with zero coordinate {} in its own category'.format(k))
    row = (points / denominators[:, None]).min(axis=0)
    row[k] = 1.0
    return row


def eta_from_points(dataset, u):
    '''
    Build the eta matrix of a configuration.
    @param dataset: Dataset
    @param u: array (N, K), row n is the point attached to observation n
    @return: K x K matrix, rows of empty categories are vacuous
    '''
    u = np.asarray(u, dtype=float)
    eta = vacuous_eta(dataset.num_categories)
    for k, index in enumerate(dataset.index_sets):
        if index.size:
            eta[k] = eta_row(u[index], k)
    return eta


def _retrace_cycle(predecessor, start, weights):
    num_nodes = len(predecessor)
    node = start
    # walking back K steps lands on the cycle
    for _ in range(num_nodes):
        node = predecessor[node]
        if node < 0:
            return [], float('nan')
    cycle = [node]
    current = predecessor[node]
    while current != node and len(cycle) <= num_nodes:
        if current < 0:
            return [], float('nan')
        cycle.append(current)
        current = predecessor[current]
    cycle.reverse()
    value = sum(weights[a, b] for a, b in zip(cycle, cycle[1:] + cycle[:1]))
    return cycle, float(value)


def bellman_ford(weights, source=None, tol=FEASIBILITY_TOL):
    '''
    Synchronous Bellman-Ford relaxation on a dense weight matrix (weights[j, l] is the edge j -> l).
    With source=None a virtual source is attached to every node, which turns the run into a
    global negative cycle detector.
    @param weights: K x K matrix of extended reals, +inf for missing edges
    @param source: start node or None
    @param tol: improvements below tol are ignored, so zero-valued cycles are not negative
    @return: tuple of distances and predecessor array
    '''
    num_nodes = weights.shape[0]
    if source is None:
        distance = np.zeros(num_nodes)
    else:
        distance = np.full(num_nodes, np.inf)
        distance[source] = 0.0
    predecessor = np.full(num_nodes, -1)
    columns = np.arange(num_nodes)

    for _ in range(num_nodes):
        candidates = distance[:, None] + weights
        best = candidates.argmin(axis=0)
        value = candidates[best, columns]
        improved = value < distance - tol
        if not improved.any():
            return distance, predecessor
        distance = np.where(improved, value, distance)
        predecessor = np.where(improved, best, predecessor)

    cycle, value = _retrace_cycle(predecessor, int(np.flatnonzero(improved)[0]), weights)
    raise NegativeCycleError(cycle, value)


def is_feasible(eta):
    try:
        bellman_ford(log_weights(eta))
    except NegativeCycleError:
        return False
    return True


def min_path_matrix(eta):
    '''
    All-pairs minimal path values, entry (l, k) = min(l -> k).
    Raises NegativeCycleError on infeasible input.
    '''
    weights = log_weights(eta)
    bellman_ford(weights)
    reversed_weights = weights.T
    paths = np.empty_like(weights)
    for k in range(weights.shape[0]):
        paths[:, k], _ = bellman_ford(reversed_weights, source=k)
    return paths


def conditional_theta(eta, k):
    '''
    Vertex of the feasible set with the largest k-th coordinate, built from shortest paths
    into k with the edges out of k ignored: theta_l proportional to exp(-min(l -> k)).
    @param eta: K x K eta matrix, row k may be stale
    @param k: category index
    @return: simplex point
    '''
    weights = log_weights(eta)
    weights[k, :] = np.inf
    weights[k, k] = 0.0
    bellman_ford(weights)
    distance, _ = bellman_ford(weights.T, source=k)
    return softmax(-distance)


def theta_in_feasible(eta, theta, tol=TOL):
    eta = np.asarray(eta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    finite = np.isfinite(eta)
    bound = np.full(eta.shape, np.inf)
    np.multiply(eta, theta[:, None], out=bound, where=finite)
    return bool(np.all(theta[None, :] <= bound + tol))


def brute_force_min_paths(eta):
    '''
    Exhaustive minimum over simple paths for every ordered pair, an oracle for min_path_matrix.
    '''
    weights = log_weights(eta)
    num_nodes = weights.shape[0]
    if num_nodes > MAX_BRUTE_FORCE_K:
        raise SizeError('brute force path enumeration is limited to K <= {}, got {}'.format(MAX_BRUTE_FORCE_K, num_nodes))

    paths = np.full((num_nodes, num_nodes), np.inf)
    np.fill_diagonal(paths, 0.0)
    for start in range(num_nodes):
        for end in range(num_nodes):
            if start == end:
                continue
            inner = [n for n in range(num_nodes) if n not in (start, end)]
            for length in range(len(inner) + 1):
                for middle in permutations(inner, length):
                    route = (start,) + middle + (end,)
                    value = sum(weights[a, b] for a, b in zip(route, route[1:]))
                    if value < paths[start, end]:
                        paths[start, end] = value
    return paths
