import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qndsim.maps import ConditionalMap


def test_single_trial_center_bin():
    m = ConditionalMap()
    m.add_tomography(np.array([0.0]), np.array([0.0]), np.array([2]), np.array([1]))
    means = m.means()
    assert means[2, 100, 100] == 1.0
    assert np.isnan(means[0, 100, 100]) and np.isnan(means[1, 100, 100])
    assert m.empty().sum() == 3 * 201 * 201 - 1
    assert m.centers[100] == pytest.approx(0.0, abs=1e-12)


def test_overflow_counted():
    m = ConditionalMap(bins=3, half_range=1.5)
    m.add_tomography(np.array([0.0, 7.0, -1.6]), np.array([0.0, 0.0, 0.0]),
                     np.array([0, 1, 2]), np.array([1, -1, 1]))
    assert m.hist.sum() == 1 and m.overflow == 2 and m.n_total == 3


def _random_map(seed, n=2000, bins=7):
    rng = np.random.default_rng(seed)
    m = ConditionalMap(bins, 2.0)
    m.add_tomography(rng.normal(size=n) * 1.5, rng.normal(size=n) * 1.5,
                     rng.integers(0, 3, n), rng.choice([-1, 1], n))
    return m


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
def test_merge_is_associative_and_commutative(a, b, c):
    x = _random_map(a).merge(_random_map(b)).merge(_random_map(c))
    y = _random_map(c).merge(_random_map(b).merge(_random_map(a)))
    for f in ("counts", "sums", "sumsq", "hist"):
        assert np.array_equal(getattr(x, f), getattr(y, f))
    assert x.overflow == y.overflow


def test_means_bounded_and_totals_match():
    m = _random_map(3, 5000)
    means = m.means()
    assert np.nanmax(np.abs(means)) <= 1.0
    assert m.counts.sum() == m.hist.sum()
    assert m.n_total == 5000


def test_vectors_feed_all_channels():
    m = ConditionalMap(5, 1.0)
    m.add_vectors(np.array([0.0, 0.05]), np.array([0.0, 0.05]), np.array([0.1, 0.3]),
                  np.array([0.5, 0.7]), np.array([-0.2, 0.0]))
    np.testing.assert_allclose(m.means()[:, 2, 2], [0.2, 0.6, -0.1])
    np.testing.assert_allclose(m.standard_errors()[0, 2, 2], 0.1 / np.sqrt(2))


def test_merge_rejects_other_grid():
    with pytest.raises(ValueError):
        ConditionalMap(5).merge(ConditionalMap(7))
