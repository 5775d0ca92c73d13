from __future__ import division
from collections import namedtuple
import warnings

import numpy as np

from permexp.core import (DEFAULT_RESOLUTION, StatisticSpec, center_components, gram_matrix, node_grid,
                          sufficient_statistic)
from permexp.util import inverse_psd, symmetrize


OriginCalibration = namedtuple('OriginCalibration', 'grad_Z0, gamma_n, gamma_limit, n')

# Bound on sqrt(n theta^T Gamma theta / L) past which the origin expansion is flagged.
ORIGIN_WARNING_RADIUS = 5.


def _node_table(spec, n):
    nodes = node_grid(n)
    return spec.outer(nodes, nodes)


def grad_Z0(spec, n):
    """Return `E_0 T = (1/n) sum_{i, j} f(i/n, j/n)`, the gradient of `log Z_n` at the origin."""
    return _node_table(spec, n).sum(axis=(0, 1)) / float(n)


def hoeffding_variance(spec, n):
    """Exact covariance matrix of `T(pi)` under the uniform distribution.

    With the doubly centered node table `c(i, j) = f(i/n, j/n) - f(i/n, .) - f(., j/n) + f(., .)`,
    `Var_0(T) = (1 / (n - 1)) sum_{i, j} c(i, j) c(i, j)^T`. For `n = 1` the statistic is constant.
    """
    if n < 1:
        raise ValueError('n must be >= 1, is {}'.format(n))
    table = _node_table(spec, n)
    if n == 1:
        return np.zeros((spec.dimension, spec.dimension))
    centered = (table - table.mean(axis=0, keepdims=True) - table.mean(axis=1, keepdims=True) +
                table.mean(axis=(0, 1), keepdims=True))
    flat = centered.reshape(n * n, spec.dimension)
    return symmetrize(flat.T.dot(flat) / float(n - 1))


def origin_calibration(spec, n, resolution=DEFAULT_RESOLUTION):
    """Bundle `grad_Z0`, `Gamma_n = Var_0(T) / n` and the limit `Gamma` of the centered spec."""
    centered = spec if spec.centered_flag else center_components(spec, resolution)
    return OriginCalibration(grad_Z0=grad_Z0(spec, n), gamma_n=hoeffding_variance(spec, n) / float(n),
                             gamma_limit=gram_matrix(centered, resolution), n=n)


def raw_gamma_matrix(spec, resolution=DEFAULT_RESOLUTION):
    """Raw second moments `int f_p f_q` of the uncentered components (`1/9` for `xy`)."""
    return gram_matrix(spec, resolution)


def approx_mle_origin(spec, permutation, raw_gamma=False, resolution=DEFAULT_RESOLUTION):
    """Linearization of the MLE around `theta = 0`: `Gamma_n^{-1} (T(pi) - grad_Z0) / n`.

    Only meaningful while the true parameter is within `O(n^{-1/2})` of the origin; a warning is
    issued when the returned value lies far outside that neighborhood.

    # Arguments
        spec (StatisticSpec): The statistic.
        permutation (Permutation): The observed permutation.
        raw_gamma (bool): Use the raw second moments `int f_p f_q` instead of the exact
            finite-`n` Hoeffding variance `Gamma_n`.

    # Raises
        SingularMatrixError: If the variance matrix is singular.
    """
    assert isinstance(spec, StatisticSpec)
    n = permutation.n
    centered_statistic = sufficient_statistic(spec, permutation) - grad_Z0(spec, n)
    if raw_gamma:
        gamma = raw_gamma_matrix(spec, resolution)
    else:
        gamma = hoeffding_variance(spec, n) / float(n)
    theta = inverse_psd(gamma, name='Gamma_n').dot(centered_statistic) / float(n)
    if n * float(theta.dot(gamma).dot(theta)) > ORIGIN_WARNING_RADIUS ** 2 * spec.dimension:
        warnings.warn('approx_mle_origin returned {} for n = {}, far outside the O(n^-1/2) neighborhood '
                      'of the origin where the linearization is valid.'.format(theta, n))
    return theta
