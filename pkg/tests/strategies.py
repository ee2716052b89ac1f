import numpy as np
from hypothesis import strategies as st


@st.composite
def simplex_points(draw, num_categories=None, min_coordinate=0.02):
    '''
    Strictly positive simplex points.
    '''
    K = draw(st.integers(2, 5)) if num_categories is None else num_categories
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=K, max_size=K))
    theta = np.array(raw) / np.sum(raw)
    theta = np.maximum(theta, min_coordinate)
    return theta / theta.sum()


@st.composite
def feasible_etas(draw, max_categories=4):
    '''
    Eta matrices that contain a known interior point: ratios of theta loosened by factors >= 1,
    some entries replaced by +inf.
    '''
    K = draw(st.integers(2, max_categories))
    theta = draw(simplex_points(K))
    slack = np.array(draw(st.lists(st.floats(1.0, 3.0), min_size=K * K, max_size=K * K))).reshape(K, K)
    vacuous = np.array(draw(st.lists(st.booleans(), min_size=K * K, max_size=K * K))).reshape(K, K)
    eta = np.outer(1.0 / theta, theta) * slack
    eta[vacuous] = np.inf
    np.fill_diagonal(eta, 1.0)
    return eta


@st.composite
def tight_etas(draw, max_categories=6):
    '''
    Exact ratio matrices of an interior point: every two-cycle product equals one.
    '''
    K = draw(st.integers(2, max_categories))
    theta = draw(simplex_points(K))
    return np.outer(1.0 / theta, theta)
