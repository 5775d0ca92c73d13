from __future__ import division
from collections import namedtuple

import numpy as np

from permexp.core import as_theta
from permexp.errors import ConvergenceError
from permexp.estimators.pseudolikelihood import DEFAULT_BLOCK_SIZE, DEFAULT_TOL, PLObjective, solve_ple
from permexp.util import as_vector, inverse_psd, normal_quantile, swap_weight, symmetrize


SandwichEstimate = namedtuple('SandwichEstimate', 'sigma_hat, a_hat, sandwich, n')
ConfidenceInterval = namedtuple('ConfidenceInterval', 'lo, hi, estimate, report, sandwich')


def a_hat(spec, permutation, theta, block_size=DEFAULT_BLOCK_SIZE):
    """Return `A_hat(theta) = n^{-2} sum_{i<j} y y^T e^{theta.y} / (1 + e^{theta.y})^2`."""
    objective = PLObjective(spec, permutation, block_size=block_size)
    n = objective.n
    return objective.hessian(theta) / float(n * n)


def sigma_hat(spec, permutation, theta, block_size=DEFAULT_BLOCK_SIZE):
    """Return the plug-in outer-product matrix `Sigma_hat(theta)`.

    The sum runs over ordered pairs of distinct edges sharing exactly one index. With
    `t(a, b) = y_pi(a, b) / (1 + e^{theta.y_pi(a, b)})` and `S_a = sum_{b != a} t(a, b)` it regroups as

        n^3 Sigma_hat = sum_a [S_a S_a^T - sum_{b != a} t(a, b) t(a, b)^T],

    which takes `O(n^2 L + n L^2)` time.
    """
    theta = as_theta(theta, spec)
    objective = PLObjective(spec, permutation, block_size=block_size)
    n = objective.n
    dim = spec.dimension
    total = np.zeros((dim, dim))
    for _, values in objective.row_blocks():
        # The diagonal of `values` is zero, so t(a, a) = 0 drops out of both sums.
        t = values * swap_weight(values.dot(theta))[:, :, None]
        sums = t.sum(axis=1)
        total += sums.T.dot(sums) - np.einsum('abp,abq->pq', t, t)
    return symmetrize(total / float(n) ** 3)


def sandwich_estimate(spec, permutation, theta, block_size=DEFAULT_BLOCK_SIZE):
    """Return `SandwichEstimate` with `sandwich = A_hat^{-1} Sigma_hat A_hat^{-1}`.

    # Raises
        SingularMatrixError: If `A_hat` is singular or its condition number exceeds `1e12`.
    """
    sigma = sigma_hat(spec, permutation, theta, block_size=block_size)
    a = a_hat(spec, permutation, theta, block_size=block_size)
    a_inv = inverse_psd(a, name='singular_a_hat: A_hat')
    return SandwichEstimate(sigma_hat=sigma, a_hat=a, sandwich=symmetrize(a_inv.dot(sigma).dot(a_inv)),
                            n=permutation.n)


def confidence_interval(spec, permutation, d, alpha=.05, tol=DEFAULT_TOL, theta_init=None):
    """Asymptotic `1 - alpha` confidence interval for `d^T theta` based on the PLE.

    The interval is `d^T theta_hat +- z_{alpha/2} n^{-1/2} sqrt(d^T A_hat^{-1} Sigma_hat A_hat^{-1} d)`,
    with both plug-in matrices evaluated at `theta_hat`.

    # Arguments
        spec (StatisticSpec): The statistic.
        permutation (Permutation): The observed permutation.
        d (array-like): Length-`L` contrast.
        alpha (float): Level in `(0, 1)`.

    # Returns
        A `ConfidenceInterval` with `lo`, `hi`, the point estimate `d^T theta_hat`, the
        `SolveReport` and the `SandwichEstimate`.

    # Raises
        ConvergenceError: If the PLE solve does not converge.
        SingularMatrixError: If `A_hat(theta_hat)` is singular.
    """
    if not 0. < alpha < 1.:
        raise ValueError('alpha must lie in (0, 1), is {}'.format(alpha))
    d = as_vector(d, dimension=spec.dimension, name='d')
    report = solve_ple(spec, permutation, theta_init=theta_init, tol=tol)
    if not report.converged:
        raise ConvergenceError('The PLE solve did not converge (scaled gradient norm {:.3e} after {} '
                               'iterations).'.format(report.gradient_norm, report.iterations))
    estimate = sandwich_estimate(spec, permutation, report.root)
    z = normal_quantile(1. - alpha / 2.)
    center = float(d.dot(report.root))
    half_width = z * np.sqrt(max(float(d.dot(estimate.sandwich).dot(d)), 0.) / permutation.n)
    return ConfidenceInterval(lo=center - half_width, hi=center + half_width, estimate=center,
                              report=report, sandwich=estimate)
