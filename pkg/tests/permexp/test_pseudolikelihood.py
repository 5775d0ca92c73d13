from __future__ import division
import itertools

import pytest
import numpy as np
from numpy.testing import assert_allclose
from scipy.optimize import brentq
from scipy.special import expit

from permexp.core import Permutation, ProductComponent, ScaledComponent, StatisticSpec, center_components
from permexp.errors import DegenerateError, NoBracketError
from permexp.estimators import PLObjective, pl_gradient, pl_hessian, pl_neg_log, solve_ple
from permexp.samplers import SamplerConfig, hit_and_run_sample, uniform_permutation
from tests.permexp.util import RowOnlyComponent, all_pair_differences


def test_gradient_at_origin():
    assert_allclose(pl_gradient(StatisticSpec('xy'), Permutation.identity(3), 0.), [1. / 3.])


def test_gradient_flips_sign_under_single_swap():
    xy = StatisticSpec('xy')
    perm = Permutation([1, 2])
    assert_allclose(pl_gradient(xy, perm.transposed(1, 2), 0.), -pl_gradient(xy, perm, 0.))


def test_neg_log_at_origin():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    for n in [2, 5, 17]:
        perm = uniform_permutation(n, np.random.default_rng(n))
        assert_allclose(pl_neg_log(spec, perm, [0., 0.]), n * (n - 1) / 2. * np.log(2.))


def test_separable_statistic_gives_constant_objective():
    spec = StatisticSpec([RowOnlyComponent()])
    perm = uniform_permutation(9, np.random.default_rng(0))
    for theta in [-3., 0., 5.]:
        assert_allclose(pl_neg_log(spec, perm, theta), 36. * np.log(2.))
        assert_allclose(pl_gradient(spec, perm, theta), [0.], atol=1e-15)


@pytest.mark.parametrize('block_size', [1, 3, 256])
def test_objective_matches_naive_sums(block_size):
    spec = StatisticSpec(['xy', 'neg_sq_diff'])
    perm = uniform_permutation(11, np.random.default_rng(4))
    theta = np.array([.7, -1.3])
    ys = all_pair_differences(spec, perm)
    s = ys.dot(theta)
    objective = PLObjective(spec, perm, block_size=block_size)
    assert_allclose(objective.neg_log(theta), np.sum(np.log1p(np.exp(-s))), rtol=1e-12)
    assert_allclose(objective.gradient(theta), ys.T.dot(expit(-s)), rtol=1e-12, atol=1e-14)
    weights = expit(s) * expit(-s)
    assert_allclose(objective.hessian(theta), (ys * weights[:, None]).T.dot(ys), rtol=1e-12, atol=1e-14)
    value, grad, hess = objective.evaluate(theta)
    assert_allclose(value, objective.neg_log(theta))
    assert_allclose(grad, -objective.gradient(theta))
    assert_allclose(hess, objective.hessian(theta))
    assert objective.nb_pairs == 55


def test_hessian_at_origin():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    perm = uniform_permutation(8, np.random.default_rng(8))
    ys = all_pair_differences(spec, perm)
    assert_allclose(pl_hessian(spec, perm, [0., 0.]), .25 * ys.T.dot(ys), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize('spec', [
    StatisticSpec('neg_abs_diff'),
    StatisticSpec(['xy', 'neg_abs_diff']),
])
def test_derivatives_match_finite_differences(spec):
    rng = np.random.default_rng(12)
    perm = uniform_permutation(6, rng)
    theta = rng.normal(size=spec.dimension)
    objective = PLObjective(spec, perm)
    h = 1e-5
    grad = np.zeros(spec.dimension)
    hess = np.zeros((spec.dimension, spec.dimension))
    for k in range(spec.dimension):
        e = np.zeros(spec.dimension)
        e[k] = h
        grad[k] = -(objective.neg_log(theta + e) - objective.neg_log(theta - e)) / (2. * h)
        hess[k] = -(objective.gradient(theta + e) - objective.gradient(theta - e)) / (2. * h)
    assert_allclose(objective.gradient(theta), grad, rtol=1e-6, atol=1e-8)
    assert_allclose(objective.hessian(theta), hess, rtol=1e-5, atol=1e-8)


def test_objective_is_convex():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    rng = np.random.default_rng(21)
    for _ in range(200):
        perm = uniform_permutation(int(rng.integers(3, 10)), rng)
        objective = PLObjective(spec, perm)
        a, b = rng.normal(scale=3., size=(2, 2))
        t = rng.random()
        mixed = objective.neg_log(t * a + (1. - t) * b)
        bound = t * objective.neg_log(a) + (1. - t) * objective.neg_log(b)
        assert mixed <= bound + 1e-10 * max(1., abs(bound))
        assert np.linalg.eigvalsh(objective.hessian(a))[0] >= -1e-12


def test_solve_ple_matches_bracketed_root():
    xy = StatisticSpec('xy')
    perm = Permutation([3, 1, 4, 7, 5, 2, 6])
    ys = all_pair_differences(xy, perm)[:, 0]

    def gradient(theta):
        return np.sum(ys * expit(-theta * ys))

    expected = brentq(gradient, -1000., 1000., xtol=1e-14)
    report = solve_ple(xy, perm)
    assert report.converged
    assert report.gradient_norm <= 1e-10
    assert_allclose(report.root, [expected], atol=1e-9)
    assert np.isfinite(report.condition_number)


def test_solve_ple_scale_equivariance():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    perm = uniform_permutation(25, np.random.default_rng(31))
    root = solve_ple(spec, perm).root
    for c in [.1, 3., 20.]:
        assert_allclose(solve_ple(spec.scaled(c), perm).root, root / c, rtol=1e-7, atol=1e-10)


def test_solve_ple_is_invariant_to_centering():
    xy = StatisticSpec('xy')
    perm = hit_and_run_sample(2., 30, SamplerConfig(method='hit_and_run', seed=5))
    raw = solve_ple(xy, perm)
    centered = solve_ple(center_components(xy), perm)
    assert_allclose(centered.root, raw.root, atol=1e-8)


def test_solve_ple_with_starting_point():
    spec = StatisticSpec(['xy', 'neg_abs_diff'])
    perm = uniform_permutation(15, np.random.default_rng(2))
    report = solve_ple(spec, perm)
    restarted = solve_ple(spec, perm, theta_init=report.root)
    assert restarted.iterations == 0
    assert_allclose(restarted.root, report.root)


def test_solve_ple_degenerate():
    perm = uniform_permutation(10, np.random.default_rng(0))
    with pytest.raises(DegenerateError):
        solve_ple(StatisticSpec([RowOnlyComponent()]), perm)
    dependent = StatisticSpec([ProductComponent(), ScaledComponent(ProductComponent(), 2.)])
    with pytest.raises(DegenerateError):
        solve_ple(dependent, perm)


def test_solve_ple_without_sign_change():
    # Every pair of the identity is concordant, so the scalar gradient stays positive.
    with pytest.raises(NoBracketError):
        solve_ple(StatisticSpec('xy'), Permutation.identity(8))
    with pytest.raises(NoBracketError):
        solve_ple(StatisticSpec('xy'), Permutation(list(range(8, 0, -1))))


def test_solve_ple_root_is_near_origin_for_uniform_draws():
    xy = StatisticSpec('xy')
    rng = np.random.default_rng(17)
    roots = [solve_ple(xy, uniform_permutation(200, rng)).root[0] for _ in range(20)]
    # sqrt(n) theta_hat is O(1) at the origin.
    assert np.max(np.abs(roots)) * np.sqrt(200.) < 100.


def test_objective_config():
    objective = PLObjective(StatisticSpec('xy'), Permutation.identity(5), block_size=2)
    objective.gradient(0.)
    config = objective.get_config()
    assert config['n'] == 5
    assert config['block_size'] == 2
    assert config['nb_gradient_evaluations'] == 1
    with pytest.raises(ValueError):
        PLObjective(StatisticSpec('xy'), Permutation.identity(5), block_size=0)


def test_pair_blocks_cover_each_pair_once():
    perm = uniform_permutation(7, np.random.default_rng(3))
    objective = PLObjective(StatisticSpec('xy'), perm, block_size=3)
    blocks = np.concatenate(list(objective.pair_blocks()))
    assert blocks.shape == (21, 1)
    assert_allclose(blocks, all_pair_differences(StatisticSpec('xy'), perm), atol=1e-15)
    assert len(list(itertools.islice(objective.row_blocks(), 10))) == 3


if __name__ == '__main__':
    pytest.main([__file__])
