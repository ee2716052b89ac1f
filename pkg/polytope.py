import logging
import enum
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, islice
from math import comb
from typing import Callable

import numpy as np

from simplex import TOL, InvalidDimensionError, make_rng
from constraint_graph import SizeError, is_feasible, min_path_matrix, theta_in_feasible, validate_eta

logger = logging.getLogger(__name__)

VERTEX_TOL = 1e-9
MAX_VERTEX_K = 8
MAX_SUBSETS = 20_000_000
CHUNK = 20_000
DEFAULT_PROBES = 256
FLAT_SLOPE = 1e-15


class EmptyFeasibleSetError(ArithmeticError):
    pass


class AssertionRelation(enum.Enum):
    CONTAINED = 'contained'
    DISJOINT = 'disjoint'
    STRADDLES = 'straddles'


@dataclass(frozen=True)
class Assertion:
    '''
    Closed subset {theta : g(theta) >= 0} of the simplex.
    g is vectorized: it maps an (n, K) array of points to n values.
    '''
    name: str
    g: Callable[[np.ndarray], np.ndarray]
    linear: bool
    num_categories: int = None

    def __call__(self, points):
        points = np.atleast_2d(points)
        if self.num_categories is not None and points.shape[1] != self.num_categories:
            raise InvalidDimensionError('assertion {} needs K={}, got K={}'.format(self.name, self.num_categories, points.shape[1]))
        return np.asarray(self.g(points), dtype=float)


def everything():
    return Assertion('everything', lambda p: np.ones(p.shape[0]), linear=True)


def nothing():
    return Assertion('nothing', lambda p: -np.ones(p.shape[0]), linear=True)


def coordinate_assertion(k, c):
    # theta_k <= c
    return Assertion('coord {} {}'.format(k + 1, c), lambda p: c - p[:, k], linear=True)


def log_ratio_assertion(k, l, c):
    # log(theta_k / theta_l) <= c  <=>  exp(c) theta_l - theta_k >= 0
    scale = np.exp(c)
    return Assertion('logratio {} {} {}'.format(k + 1, l + 1, c), lambda p: scale * p[:, l] - p[:, k], linear=True)


def independence_assertion():
    # positive association theta_1 theta_4 >= theta_2 theta_3
    return Assertion('independence', lambda p: p[:, 0] * p[:, 3] - p[:, 1] * p[:, 2], linear=False, num_categories=4)


def _constraint_rows(eta):
    '''
    Half-space rows a with a . theta <= 0 that can be active at a vertex.
    Ratio rows use the shortest-path closure of eta; a row implied by a two-step path of kept
    rows is dropped, and non-negativity rows are kept only for coordinates that can vanish.
    '''
    num_categories = eta.shape[0]
    closure = min_path_matrix(eta)
    reachable = np.isfinite(closure)

    kept = {(k, l) for k in range(num_categories) for l in range(num_categories) if k != l and reachable[k, l]}
    for k, l in sorted(kept):
        for j in range(num_categories):
            if j in (k, l) or (k, j) not in kept or (j, l) not in kept:
                continue
            if closure[k, j] + closure[j, l] <= closure[k, l] + TOL:
                kept.discard((k, l))
                break

    rows = []
    for k, l in sorted(kept):
        row = np.zeros(num_categories)
        row[l] = 1.0
        row[k] = -np.exp(closure[k, l])
        rows.append(row / np.linalg.norm(row))
    for j in range(num_categories):
        # theta_j = 0 forces every coordinate reachable from j to zero as well
        if not reachable[j].all():
            row = np.zeros(num_categories)
            row[j] = -1.0
            rows.append(row)
    return np.array(rows).reshape(-1, num_categories)


def _solve_subsets(rows, num_categories):
    points = []
    subsets = combinations(range(rows.shape[0]), num_categories - 1)
    normalization = np.ones((1, num_categories))
    rhs = np.zeros(num_categories)
    rhs[-1] = 1.0
    while True:
        chunk = np.array(list(islice(subsets, CHUNK)), dtype=int).reshape(-1, num_categories - 1)
        if chunk.shape[0] == 0:
            break
        systems = np.concatenate([rows[chunk], np.broadcast_to(normalization, (chunk.shape[0], 1, num_categories))], axis=1)
        regular = np.abs(np.linalg.det(systems)) > 1e-12
        if regular.any():
            points.append(np.linalg.solve(systems[regular], np.broadcast_to(rhs, (int(regular.sum()), num_categories))[..., None])[..., 0])
    if not points:
        return np.zeros((0, num_categories))
    return np.concatenate(points)


def _deduplicate(points, tol=VERTEX_TOL):
    unique = []
    for point in points[np.lexsort(points.T[::-1])]:
        if not unique or np.min(np.linalg.norm(np.array(unique) - point, axis=1)) > tol:
            unique.append(point)
    return np.array(unique)


def vertices(eta):
    '''
    Enumerate the vertices of {theta in simplex : theta_l <= eta_{k->l} theta_k}.
    Every (K-1)-subset of candidate rows is joined with the normalization hyperplane and solved;
    solutions outside the set are discarded and the rest deduplicated at distance 1e-9.
    @param eta: feasible K x K eta matrix, K <= 8
    @return: array (n_vertices, K)
    '''
    eta = validate_eta(eta)
    num_categories = eta.shape[0]
    if num_categories > MAX_VERTEX_K:
        raise SizeError('vertex enumeration is limited to K <= {}, got {}'.format(MAX_VERTEX_K, num_categories))
    if not is_feasible(eta):
        raise EmptyFeasibleSetError('eta describes an empty feasible set')

    rows = _constraint_rows(eta)
    if comb(rows.shape[0], num_categories - 1) > MAX_SUBSETS:
        raise SizeError('{} candidate rows at K={} is beyond brute-force enumeration'.format(rows.shape[0], num_categories))

    candidates = _solve_subsets(rows, num_categories)
    candidates = candidates[np.all(candidates >= -VERTEX_TOL, axis=1)]
    candidates = np.clip(candidates, 0.0, None)
    candidates /= candidates.sum(axis=1, keepdims=True)
    inside = np.array([theta_in_feasible(eta, c, tol=VERTEX_TOL) for c in candidates], dtype=bool)
    result = _deduplicate(candidates[inside]) if inside.any() else np.zeros((0, num_categories))
    if result.shape[0] == 0:
        raise EmptyFeasibleSetError('no vertex survived the feasibility filter')
    logger.debug('%d candidate rows, %d vertices', rows.shape[0], result.shape[0])
    return result


def coordinate_extremes(eta, k, points=None):
    '''
    Smallest and largest value of theta_k over the feasible set.
    '''
    points = vertices(eta) if points is None else points
    return float(points[:, k].min()), float(points[:, k].max())


def segment_phi_interval(eta, A, b, phi_range=(0.0, 1.0), tol=TOL):
    '''
    Interval of phi in phi_range with theta(phi) = A phi + b inside the feasible set.
    Each ratio constraint theta_l - eta_{k->l} theta_k <= 0 is linear in phi.
    @param eta: feasible eta matrix
    @param A: slope vector of the segment
    @param b: offset vector of the segment
    @param phi_range: (low, high) bounds
    @return: (low, high) tuple or None when the segment misses the set
    '''
    eta = np.asarray(eta, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    low, high = float(phi_range[0]), float(phi_range[1])

    finite = np.isfinite(eta)
    np.fill_diagonal(finite, False)
    k, l = np.nonzero(finite)
    slope = A[l] - eta[k, l] * A[k]
    offset = b[l] - eta[k, l] * b[k]

    rising = slope > FLAT_SLOPE
    falling = slope < -FLAT_SLOPE
    if rising.any():
        high = min(high, float(np.min(-offset[rising] / slope[rising])))
    if falling.any():
        low = max(low, float(np.max(-offset[falling] / slope[falling])))
    flat = ~(rising | falling)
    if np.any(offset[flat] > tol):
        return None
    if low > high + 1e-9:
        return None
    if low > high:
        low = high = 0.5 * (low + high)
    return low, high


def _probe_points(points, num_probes, rng):
    '''
    Interior points of the convex hull: edge midpoints of the vertex list plus uniform draws in
    simplices fanned out from the vertex centroid.
    '''
    num_vertices, num_categories = points.shape
    centroid = points.mean(axis=0)
    probes = [centroid[None, :]]
    if num_vertices > 1:
        first, second = np.triu_indices(num_vertices, k=1)
        probes.append(0.5 * (points[first] + points[second]))
    if num_probes > 0 and num_vertices > 1:
        corners = min(num_vertices, num_categories - 1)
        picks = np.argsort(rng.random((num_probes, num_vertices)), axis=1)[:, :corners]
        weights = rng.dirichlet(np.ones(corners + 1), size=num_probes)
        probes.append(weights[:, :1] * centroid + np.einsum('nc,nck->nk', weights[:, 1:], points[picks]))
    return np.concatenate(probes)


def _relation(values, tol=TOL):
    if np.all(values >= -tol):
        return AssertionRelation.CONTAINED
    if np.all(values < -tol):
        return AssertionRelation.DISJOINT
    return AssertionRelation.STRADDLES


def classify(eta, assertion, num_probes=DEFAULT_PROBES, rng=None, points=None):
    '''
    Relation between the feasible set of eta and an assertion.
    Linear assertions are decided on the vertices alone. Nonlinear ones are decided on the vertices
    when the signs already disagree, otherwise on additional interior probes (approximate).
    @param eta: feasible eta matrix
    @param assertion: Assertion
    @param num_probes: interior probes for nonlinear assertions
    @param rng: generator for the probes, seeded deterministically when None
    @param points: precomputed vertices
    @return: AssertionRelation
    '''
    points = vertices(eta) if points is None else points
    relation = _relation(assertion(points))
    if assertion.linear or relation is AssertionRelation.STRADDLES:
        return relation
    rng = make_rng(0) if rng is None else rng
    return _relation(np.concatenate([assertion(points), assertion(_probe_points(points, num_probes, rng))]))


class FeasibleSet:
    '''
    Feasible set in half-space form with lazily enumerated, cached vertices.
    '''

    def __init__(self, eta):
        self.eta = np.array(validate_eta(eta))
        self.eta.setflags(write=False)

    @cached_property
    def vertices(self):
        points = vertices(self.eta)
        points.setflags(write=False)
        return points

    def is_empty(self):
        return not is_feasible(self.eta)

    def contains(self, theta):
        return theta_in_feasible(self.eta, theta)

    def classify(self, assertion, num_probes=DEFAULT_PROBES, rng=None):
        return classify(self.eta, assertion, num_probes=num_probes, rng=rng, points=self.vertices)

    def coordinate_extremes(self, k):
        return coordinate_extremes(self.eta, k, points=self.vertices)

    def phi_interval(self, A, b, phi_range=(0.0, 1.0)):
        return segment_phi_interval(self.eta, A, b, phi_range)
