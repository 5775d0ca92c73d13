from __future__ import division

import pytest
import numpy as np
from numpy.testing import assert_allclose
from scipy import stats

from permexp.core import Permutation, StatisticSpec
from permexp.errors import DegenerateError, SingularMatrixError
from permexp.estimators import a_hat, confidence_interval, pl_hessian, sandwich_estimate, sigma_hat, solve_ple
from permexp.samplers import uniform_permutation
from tests.permexp.util import RowOnlyComponent, all_pair_differences, naive_sigma_hat


def test_a_hat_at_origin():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    perm = uniform_permutation(9, np.random.default_rng(1))
    ys = all_pair_differences(spec, perm)
    assert_allclose(a_hat(spec, perm, [0., 0.]), ys.T.dot(ys) / (4. * 81.), rtol=1e-12, atol=1e-16)
    assert_allclose(a_hat(StatisticSpec([RowOnlyComponent()]), perm, 1.), [[0.]])


def test_sigma_hat_matches_naive_sum():
    rng = np.random.default_rng(77)
    specs = [StatisticSpec('xy'), StatisticSpec(['xy', 'neg_abs_diff']),
             StatisticSpec(['neg_sq_diff', 'neg_abs_diff', 'xy'])]
    for _ in range(20):
        spec = specs[int(rng.integers(len(specs)))]
        n = int(rng.integers(3, 13))
        perm = uniform_permutation(n, rng)
        theta = rng.normal(size=spec.dimension)
        block_size = int(rng.integers(1, 5))
        scale = naive_sigma_hat(spec, perm, theta, absolute=True).max()
        assert_allclose(sigma_hat(spec, perm, theta, block_size=block_size), naive_sigma_hat(spec, perm, theta),
                        rtol=1e-13, atol=1e-13 * scale)


def test_sigma_hat_example():
    xy = StatisticSpec('xy')
    perm = Permutation([2, 5, 1, 8, 3, 7, 4, 6])
    theta = np.array([1.])
    scale = naive_sigma_hat(xy, perm, theta, absolute=True).max()
    assert_allclose(sigma_hat(xy, perm, 1.), naive_sigma_hat(xy, perm, theta), rtol=1e-13, atol=1e-13 * scale)


def test_matrices_are_exactly_symmetric():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    perm = uniform_permutation(40, np.random.default_rng(4))
    theta = [.5, 1.]
    estimate = sandwich_estimate(spec, perm, theta)
    for matrix in (estimate.sigma_hat, estimate.a_hat, estimate.sandwich):
        assert np.array_equal(matrix, matrix.T)
    assert estimate.n == 40


def test_sandwich_rejects_unidentified_statistic():
    # -(x - y)^2 = 2xy - x^2 - y^2, so its pair differences are twice those of xy.
    spec = StatisticSpec(['xy', 'neg_abs_diff', 'neg_sq_diff'])
    perm = uniform_permutation(40, np.random.default_rng(4))
    with pytest.raises(SingularMatrixError):
        sandwich_estimate(spec, perm, [.5, 1., -2.])


def test_confidence_interval_recomposes_from_parts():
    xy = StatisticSpec('xy')
    perm = Permutation([3, 1, 4, 7, 5, 2, 6])
    interval = confidence_interval(xy, perm, [1.], alpha=.1)

    root = solve_ple(xy, perm).root
    sigma = naive_sigma_hat(xy, perm, root)
    a = pl_hessian(xy, perm, root) / 49.
    a_inv = np.linalg.inv(a)
    variance = a_inv.dot(sigma).dot(a_inv)[0, 0]
    half_width = stats.norm.ppf(.95) * np.sqrt(variance / 7.)
    assert_allclose(interval.estimate, root[0], atol=1e-9)
    assert_allclose(interval.lo, root[0] - half_width, atol=1e-9)
    assert_allclose(interval.hi, root[0] + half_width, atol=1e-9)
    assert interval.report.converged


def test_confidence_interval_contrast_and_scale():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    perm = uniform_permutation(60, np.random.default_rng(10))
    d = np.array([1., -2.])
    interval = confidence_interval(spec, perm, d)
    assert interval.lo < interval.estimate < interval.hi
    assert_allclose(interval.estimate, d.dot(interval.report.root))

    scaled = confidence_interval(spec.scaled(4.), perm, d)
    assert_allclose(4. * scaled.lo, interval.lo, rtol=1e-6, atol=1e-8)
    assert_allclose(4. * scaled.hi, interval.hi, rtol=1e-6, atol=1e-8)


def test_confidence_interval_width_shrinks_with_confidence():
    xy = StatisticSpec('xy')
    perm = uniform_permutation(50, np.random.default_rng(6))
    wide = confidence_interval(xy, perm, [1.], alpha=.01)
    narrow = confidence_interval(xy, perm, [1.], alpha=.5)
    tiny = confidence_interval(xy, perm, [1.], alpha=1. - 1e-9)
    assert wide.hi - wide.lo > narrow.hi - narrow.lo > tiny.hi - tiny.lo
    assert tiny.hi - tiny.lo < 1e-6 * (wide.hi - wide.lo)


def test_confidence_interval_errors():
    xy = StatisticSpec('xy')
    perm = uniform_permutation(20, np.random.default_rng(0))
    for alpha in [0., 1., 1.5]:
        with pytest.raises(ValueError):
            confidence_interval(xy, perm, [1.], alpha=alpha)
    with pytest.raises(ValueError):
        confidence_interval(xy, perm, [1., 0.])
    with pytest.raises(DegenerateError):
        confidence_interval(StatisticSpec([RowOnlyComponent()]), perm, [1.])


if __name__ == '__main__':
    pytest.main([__file__])
