import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplex import (Dataset, DegenerateSubsimplexError, InvalidDimensionError, make_rng, multinomial_pmf, named_rng,
                     normalize, sample_uniform_simplex, sample_uniform_subsimplex, simplex_from_exponentials,
                     subsimplex_contains, subsimplex_index, subsimplex_point)
from strategies import simplex_points

THETA = np.array([0.5, 0.3, 0.2])


@pytest.mark.parametrize('w, expected', [
    ([1.0, 1.0, 2.0], [0.25, 0.25, 0.5]),
    ([3.0, 1.0], [0.75, 0.25]),
])
def test_simplex_from_exponentials(w, expected):
    np.testing.assert_allclose(simplex_from_exponentials(np.array(w)), expected)


def test_normalize_rejects_zero_vector():
    with pytest.raises(ValueError):
        normalize(np.zeros(3))


@pytest.mark.parametrize('K', [0, 1])
def test_sample_uniform_simplex_dimension(K):
    with pytest.raises(InvalidDimensionError):
        sample_uniform_simplex(K, make_rng(1))


def test_sample_uniform_simplex_marginal_mean():
    points = sample_uniform_simplex(4, make_rng(1), size=100_000)
    np.testing.assert_allclose(points.sum(axis=1), 1.0)
    assert points[:, 0].mean() == pytest.approx(0.25, abs=0.005)


def test_make_rng_streams():
    first = make_rng(7, 0).random(5)
    np.testing.assert_array_equal(first, make_rng(7, 0).random(5))
    assert not np.array_equal(first, make_rng(7, 1).random(5))
    assert not np.array_equal(named_rng(7, 'gibbs').random(5), named_rng(7, 'probes').random(5))


def test_subsimplex_point():
    u = subsimplex_point(0, THETA, np.array([0.2, 0.5, 0.3]))
    np.testing.assert_allclose(u, [0.10, 0.56, 0.34])
    assert subsimplex_contains(u, 0, THETA)


def test_subsimplex_point_all_weight_on_theta():
    np.testing.assert_allclose(subsimplex_point(1, THETA, np.array([0.0, 1.0, 0.0])), THETA)


def test_subsimplex_zero_volume():
    with pytest.raises(DegenerateSubsimplexError):
        sample_uniform_subsimplex(2, np.array([0.5, 0.5, 0.0]), make_rng(1))


@pytest.mark.parametrize('u, k, theta', [
    ([0.2, 0.3, 0.5], 0, [1 / 3, 1 / 3, 1 / 3]),
    ([0.1, 0.6, 0.3], 0, [1.0, 0.0, 0.0]),
    ([0.10, 0.56, 0.34], 0, [0.5, 0.3, 0.2]),
])
def test_subsimplex_contains(u, k, theta):
    assert subsimplex_contains(np.array(u), k, np.array(theta))


def test_subsimplex_contains_outside():
    assert not subsimplex_contains(np.array([0.5, 0.3, 0.2]), 0, np.array([1 / 3, 1 / 3, 1 / 3]))


def test_subsimplex_volume_is_theta_k():
    points = sample_uniform_simplex(3, make_rng(2), size=100_000)
    assert subsimplex_contains(points, 0, THETA).mean() == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize('u, theta, expected', [
    ([0.2, 0.3, 0.5], [1 / 3, 1 / 3, 1 / 3], 0),
    ([0.5, 0.3, 0.2], [0.5, 0.3, 0.2], 0),
])
def test_subsimplex_index(u, theta, expected):
    assert subsimplex_index(np.array(u), np.array(theta)) == expected


def test_sampling_mechanism_frequencies():
    points = sample_uniform_simplex(3, make_rng(3), size=100_000)
    labels = subsimplex_index(points, THETA)
    np.testing.assert_allclose(np.bincount(labels, minlength=3) / labels.size, THETA, atol=0.01)


@pytest.mark.parametrize('counts, theta, expected', [
    ((1, 1), (0.5, 0.5), 0.5),
    ((2, 1, 1), (0.5, 0.25, 0.25), 0.1875),
    ((0, 0), (0.3, 0.7), 1.0),
    ((1, 2), (1.0, 0.0), 0.0),
])
def test_multinomial_pmf(counts, theta, expected):
    assert multinomial_pmf(counts, theta) == pytest.approx(expected)


@settings(max_examples=100, deadline=None)
@given(theta=simplex_points(), data=st.data())
def test_subsimplex_point_lands_in_subsimplex(theta, data):
    K = theta.shape[0]
    k = data.draw(st.integers(0, K - 1))
    w = np.array(data.draw(st.lists(st.floats(1e-3, 1e3), min_size=K, max_size=K)))
    u = subsimplex_point(k, theta, w)
    assert u.sum() == pytest.approx(1.0)
    assert np.all(u >= 0)
    assert subsimplex_contains(u, k, theta)


class TestDataset:

    def test_from_counts(self):
        dataset = Dataset.from_counts([2, 0, 1])
        np.testing.assert_array_equal(dataset.observations, [0, 0, 2])
        np.testing.assert_array_equal(dataset.counts, [2, 0, 1])
        assert dataset.size == 3
        assert [s.tolist() for s in dataset.index_sets] == [[0, 1], [], [2]]

    def test_observations_are_copied(self):
        labels = np.array([0, 1, 1])
        dataset = Dataset(2, labels)
        labels[0] = 1
        assert dataset.observations[0] == 0
        assert labels.flags.writeable

    @pytest.mark.parametrize('K, labels', [(2, [0, 2]), (3, [-1])])
    def test_labels_out_of_range(self, K, labels):
        with pytest.raises(ValueError):
            Dataset(K, labels)

    def test_too_few_categories(self):
        with pytest.raises(InvalidDimensionError):
            Dataset.from_counts([3])

    def test_category_surgery(self):
        dataset = Dataset(3, [2, 0, 2])
        lifted = dataset.add_category()
        assert lifted.num_categories == 4
        np.testing.assert_array_equal(lifted.counts, [1, 0, 2, 0])
        reduced = dataset.remove_category(1)
        np.testing.assert_array_equal(reduced.observations, [1, 0, 1])
        with pytest.raises(ValueError):
            dataset.remove_category(0)

    def test_append(self):
        dataset = Dataset(2).append(1)
        np.testing.assert_array_equal(dataset.counts, [0, 1])
