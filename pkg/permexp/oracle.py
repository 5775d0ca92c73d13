from __future__ import division
import itertools
import math

import numpy as np
from scipy.special import expit, logsumexp

from permexp.core import as_theta, node_grid
from permexp.errors import BoundaryError, SingularMatrixError
from permexp.util import symmetrize


MAX_ORACLE_N = 8
MAX_CONDITIONAL_N = 5
MLE_TOL = 1e-11
MLE_MAX_ITERATIONS = 200
# |theta| beyond which the exact MLE is declared divergent.
DIVERGENCE_NORM = 1e6


def _check_size(n, limit=MAX_ORACLE_N):
    if not 1 <= n <= limit:
        raise ValueError('Exact enumeration is limited to 1 <= n <= {}, got n = {}.'.format(limit, n))


def lexicographic_rank(index):
    """Return the lexicographic rank of 0-indexed permutations (rows of `index`) within `S_n`."""
    index = np.atleast_2d(index)
    n = index.shape[1]
    later = np.triu(np.ones((n, n), dtype=bool), k=1)
    inversions = np.sum((index[:, None, :] < index[:, :, None]) & later[None, :, :], axis=2)
    weights = np.array([math.factorial(n - 1 - k) for k in range(n)], dtype=np.int64)
    return inversions.dot(weights)


class PermutationTable(object):
    """All `n!` permutations of size `n` in lexicographic order with their sufficient statistics.

    # Attributes
        index (np.ndarray): `(n!, n)` array of 0-indexed images.
        statistics (np.ndarray): `(n!, L)` array of `T(sigma)`.
    """
    def __init__(self, spec, n):
        _check_size(n)
        self.spec = spec
        self.n = n
        self.index = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
        nodes = node_grid(n)
        table = spec.outer(nodes, nodes)
        self.statistics = table[np.arange(n)[None, :], self.index].sum(axis=1)

    def __len__(self):
        return self.index.shape[0]

    def rank(self, permutation):
        return int(lexicographic_rank(permutation.index)[0])

    def log_weights(self, theta):
        return self.statistics.dot(as_theta(theta, self.spec))


class ExactModel(object):
    """`P_{n, theta}` computed by enumerating `S_n` (`n <= 8`, at most 40320 states).

    # Arguments
        spec (StatisticSpec): The statistic.
        theta (array-like): The parameter.
        n (int): Permutation size.
        table (PermutationTable): Optional precomputed enumeration for the same `spec` and `n`.
    """
    def __init__(self, spec, theta, n, table=None):
        _check_size(n)
        self.spec = spec
        self.theta = as_theta(theta, spec)
        self.n = n
        self.table = PermutationTable(spec, n) if table is None else table
        log_weights = self.table.log_weights(self.theta)
        self.log_Z = float(logsumexp(log_weights))
        self.probabilities = np.exp(log_weights - self.log_Z)

    @property
    def permutations(self):
        return self.table.index

    @property
    def statistics(self):
        return self.table.statistics

    def probability(self, permutation):
        return float(self.probabilities[self.table.rank(permutation)])

    def mean_statistic(self):
        """Return `E_theta T`, which equals the gradient of `log Z_n`."""
        return self.probabilities.dot(self.statistics)

    def covariance_statistic(self):
        """Return `Var_theta T`, which equals the Hessian of `log Z_n`."""
        centered = self.statistics - self.mean_statistic()[None, :]
        return symmetrize((centered * self.probabilities[:, None]).T.dot(centered))

    def distribution_of_statistic(self, decimals=12):
        """Return the distinct values of `T` (rounded to `decimals`) and their probabilities."""
        values, inverse = np.unique(np.round(self.statistics, decimals), axis=0, return_inverse=True)
        masses = np.bincount(inverse.reshape(-1), weights=self.probabilities, minlength=values.shape[0])
        return values, masses

    def single_marginals(self):
        """Return `P[i, a] = P(pi(i) = a)`, 0-indexed."""
        n = self.n
        marginals = np.zeros((n, n))
        for i in range(n):
            marginals[i] = np.bincount(self.table.index[:, i], weights=self.probabilities, minlength=n)
        return marginals

    def pair_marginals(self):
        """Return `P[i, j, a, b] = P(pi(i) = a, pi(j) = b)`, all indices 0-indexed."""
        n = self.n
        one_hot = (self.table.index[:, :, None] == np.arange(n)[None, None, :]).reshape(len(self.table), n * n)
        one_hot = one_hot.astype(np.float64)
        joint = (one_hot * self.probabilities[:, None]).T.dot(one_hot)
        return joint.reshape(n, n, n, n).transpose(0, 2, 1, 3)

    def get_config(self):
        return {'n': self.n, 'theta': self.theta.tolist(), 'log_Z': self.log_Z, 'spec': self.spec.get_config()}


def exact_log_partition(spec, theta, n):
    """Return `log Z_n(theta) = log sum_{sigma in S_n} exp(theta^T T(sigma))`."""
    return ExactModel(spec, theta, n).log_Z


def exact_pair_marginals(spec, theta, n):
    return ExactModel(spec, theta, n).pair_marginals()


def exact_mle(spec, permutation, max_iter=MLE_MAX_ITERATIONS, tol=MLE_TOL):
    """Solve `grad log Z_n(theta) = T(pi)` by damped Newton on the exact log partition function.

    # Returns
        The maximum likelihood estimate as a length-`L` array.

    # Raises
        BoundaryError: If `T(pi)` lies on the boundary of the convex hull of `{T(sigma)}`, in which
            case the likelihood has no maximizer.
        SingularMatrixError: If `Var_theta T` is singular (linearly dependent statistic).
    """
    n = permutation.n
    table = PermutationTable(spec, n)
    observed = table.statistics[table.rank(permutation)]
    scale = max(1., float(np.max(np.abs(table.statistics))))
    if spec.dimension == 1:
        lowest, highest = table.statistics[:, 0].min(), table.statistics[:, 0].max()
        if observed[0] >= highest - 1e-12 * scale or observed[0] <= lowest + 1e-12 * scale:
            raise BoundaryError('T(pi) = {} attains the {} of T over S_{}; the MLE diverges (boundary).'.format(
                observed[0], 'maximum' if observed[0] >= highest - 1e-12 * scale else 'minimum', n))

    def objective(theta):
        return float(logsumexp(table.log_weights(theta))) - float(theta.dot(observed))

    theta = np.zeros(spec.dimension)
    value = objective(theta)
    for _ in range(max_iter):
        model = ExactModel(spec, theta, n, table=table)
        residual = model.mean_statistic() - observed
        if np.linalg.norm(residual) <= tol * scale:
            return theta
        try:
            step = np.linalg.solve(model.covariance_statistic(), -residual)
        except np.linalg.LinAlgError:
            raise SingularMatrixError('Var_theta T is singular at theta = {}.'.format(theta))
        t = 1.
        while t > 1e-12:
            candidate = theta + t * step
            candidate_value = objective(candidate)
            if candidate_value <= value + 1e-14 * max(1., abs(value)):
                break
            t *= .5
        theta, value = candidate, candidate_value
        if np.linalg.norm(theta) > DIVERGENCE_NORM:
            break
    raise BoundaryError('Newton for the exact MLE did not converge (|theta| = {:.3e}); T(pi) is on or '
                        'numerically at the boundary of its convex hull.'.format(np.linalg.norm(theta)))


def verify_conditional_mean_zero(spec, theta, n):
    """Return the largest `|E(C_ij(pi, e_r) | pi(l), l != i, j)|` over pairs, basis vectors and configurations.

    `C_ij(pi) = y_pi(i, j) / (1 + e^{theta.y_pi(i, j)})`. Given the other images, `pi` is either a
    configuration `sigma` or `sigma o (i j)`; both completions are weighted by their exact probabilities.
    """
    _check_size(n, MAX_CONDITIONAL_N)
    theta = as_theta(theta, spec)
    table = PermutationTable(spec, n)
    log_weights = table.log_weights(theta)
    nodes = node_grid(n)
    values = spec.outer(nodes, nodes)
    worst = 0.
    for i, j in itertools.combinations(range(n), 2):
        pi_i, pi_j = table.index[:, i], table.index[:, j]
        y = (values[i, pi_i] + values[j, pi_j]) - (values[i, pi_j] + values[j, pi_i])
        c = y * expit(-y.dot(theta))[:, None]
        swapped = table.index.copy()
        swapped[:, [i, j]] = swapped[:, [j, i]]
        partner = lexicographic_rank(swapped)
        own = pi_i < pi_j
        # Conditional probability of the configuration itself within its two-element class.
        keep = expit(log_weights[own] - log_weights[partner[own]])
        mean = keep[:, None] * c[own] + (1. - keep)[:, None] * c[partner[own]]
        if mean.size:
            worst = max(worst, float(np.max(np.abs(mean))))
    return worst
