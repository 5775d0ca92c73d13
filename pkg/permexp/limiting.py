from __future__ import division

import numpy as np
from scipy.special import expit, logsumexp

from permexp.core import as_theta, gram_matrix
from permexp.errors import ConvergenceError, NotCenteredError
from permexp.util import inverse_psd, midpoint_grid, symmetrize


DEFAULT_GRID = 256
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100000
MIN_GRID = 16
# Upper bound on the number of entries of one pair-kernel chunk in the quadratures.
CHUNK_ELEMENTS = 2 ** 22


class CouplingGrid(object):
    """The limiting coupling `mu_theta` discretized on the `m x m` midpoint grid.

    `density[k, l]` approximates `rho_theta((k + 1/2)/m, (l + 1/2)/m)` and equals
    `exp(theta^T f + a[k] + b[l])` there. Both discrete marginals are uniform, i.e. every row and
    column of `density` averages to 1 up to `marginal_error`.

    # Attributes
        m (int): Grid resolution.
        density (np.ndarray): `m x m` positive array.
        a, b (np.ndarray): Row and column potentials, gauge fixed so that `sum(a) == sum(b)`.
        theta (np.ndarray): The parameter.
        spec (StatisticSpec): The statistic.
        marginal_error (float): Largest deviation of a row or column average from 1.
        iterations (int): Number of Sinkhorn iterations.
        history (list): Marginal error after every iteration.
    """
    def __init__(self, spec, theta, a, b, marginal_error, iterations, history):
        self.spec = spec
        self.theta = theta
        self.a = a
        self.b = b
        self.m = a.shape[0]
        self.points = midpoint_grid(self.m)
        self.log_density = self._log_kernel(self.points, self.points) + a[:, None] + b[None, :]
        self.density = np.exp(self.log_density)
        self.marginal_error = marginal_error
        self.iterations = iterations
        self.history = history
        for array in (self.a, self.b, self.log_density, self.density):
            array.flags.writeable = False

    @property
    def potentials(self):
        return self.a, self.b

    def _log_kernel(self, xs, ys):
        return self.spec.outer(xs, ys).dot(self.theta)

    def marginals(self):
        """Return the row and column averages of the density."""
        return self.density.mean(axis=1), self.density.mean(axis=0)

    def density_at(self, x, y):
        """Evaluate `rho_theta` at arbitrary points, interpolating the potentials linearly."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        x, y = np.broadcast_arrays(x, y)
        a = np.interp(x, self.points, self.a)
        b = np.interp(y, self.points, self.b)
        return np.exp(self.spec.evaluate(x, y).dot(self.theta) + a + b)

    def get_config(self):
        return {
            'm': self.m,
            'theta': self.theta.tolist(),
            'marginal_error': self.marginal_error,
            'iterations': self.iterations,
        }


def _marginal_error(log_density, log_m):
    rows = np.exp(logsumexp(log_density, axis=1) - log_m)
    cols = np.exp(logsumexp(log_density, axis=0) - log_m)
    return float(max(np.max(np.abs(rows - 1.)), np.max(np.abs(cols - 1.))))


def sinkhorn_density(spec, theta, m=DEFAULT_GRID, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, verbose=0):
    """Scale `K(x, y) = exp(theta^T f(x, y))` on the midpoint grid to uniform marginals.

    The iteration runs on the log potentials: `a` normalizes the rows, then `b` the columns, until
    the largest row deviation (the columns are exact after each `b` update) is at most `tol`.

    # Arguments
        spec (StatisticSpec): The statistic.
        theta (array-like): The parameter.
        m (int): Grid resolution, at least 16.
        tol (float): Tolerance on the marginal error.
        max_iters (int): Maximum number of iterations.
        verbose (int): If positive, print the marginal error every 100 iterations.

    # Returns
        A `CouplingGrid`.

    # Raises
        ConvergenceError: If the tolerance is not reached within `max_iters` iterations.
    """
    theta = as_theta(theta, spec)
    if m < MIN_GRID:
        raise ValueError('The grid resolution must be >= {}, is {}'.format(MIN_GRID, m))
    q = midpoint_grid(m)
    log_kernel = spec.outer(q, q).dot(theta)
    log_m = np.log(m)

    a = np.zeros(m)
    b = np.zeros(m)
    history = []
    error = np.inf
    for iteration in range(1, max_iters + 1):
        a = log_m - logsumexp(log_kernel + b[None, :], axis=1)
        b = log_m - logsumexp(log_kernel + a[:, None], axis=0)
        rows = np.exp(logsumexp(log_kernel + a[:, None] + b[None, :], axis=1) - log_m)
        error = float(np.max(np.abs(rows - 1.)))
        history.append(error)
        if verbose > 0 and iteration % 100 == 0:
            print('Sinkhorn iteration {}: marginal error {:.3e}'.format(iteration, error))
        if error <= tol:
            break
    else:
        raise ConvergenceError('Sinkhorn did not converge in {} iterations (max_iters_exceeded), last marginal '
                               'error {:.3e}.'.format(max_iters, error))

    shift = (np.sum(b) - np.sum(a)) / (2. * m)
    a = a + shift
    b = b - shift
    error = _marginal_error(log_kernel + a[:, None] + b[None, :], log_m)
    return CouplingGrid(spec, theta, a, b, marginal_error=error, iterations=len(history), history=history)


def _check_theta(grid, theta):
    if theta is None:
        return grid.theta
    theta = as_theta(theta, grid.spec)
    if not np.array_equal(theta, grid.theta):
        raise ValueError('theta {} does not match the grid parameter {}'.format(theta, grid.theta))
    return theta


def _cell_table(grid, spec):
    return spec.outer(grid.points, grid.points)


def limiting_z_vector(grid, spec=None):
    """Return `z(theta) = mu_theta(f)` by midpoint quadrature."""
    spec = grid.spec if spec is None else spec
    table = _cell_table(grid, spec)
    return np.einsum('kl,klp->p', grid.density, table) / float(grid.m * grid.m)


def limiting_log_partition(grid, spec=None, theta=None):
    """Return `Z(theta) = theta^T mu_theta(f) - D(mu_theta || u)` at the discrete optimum."""
    spec = grid.spec if spec is None else spec
    theta = _check_theta(grid, theta)
    entropy = np.mean(grid.density * grid.log_density)
    return float(theta.dot(limiting_z_vector(grid, spec)) - entropy)


def asymptotic_matrices(grid, spec=None, theta=None):
    """Return `(Sigma(theta), A(theta))` from one pass over pairs of grid cells.

    With `g(z1, z2) = f(x1, y1) + f(x2, y2) - f(x1, y2) - f(x2, y1)` and cell masses
    `w = density / m^2`:

    - `Sigma = sum_{z1} w(z1) s(z1) s(z1)^T` with `s(z1) = sum_{z2} w(z2) g(z1, z2) / (1 + e^{theta.g})`,
    - `A = (1/2) sum_{z1, z2} w(z1) w(z2) g g^T e^{theta.g} / (1 + e^{theta.g})^2`.

    The cost is `O(m^4 L^2)`; pairs are processed for one first-cell row at a time, in chunks of
    second-cell rows.
    """
    spec = grid.spec if spec is None else spec
    theta = _check_theta(grid, theta)
    m = grid.m
    dim = spec.dimension
    table = _cell_table(grid, spec)
    weights = grid.density / float(m * m)
    chunk = max(1, CHUNK_ELEMENTS // (m * m * dim))

    s = np.zeros((m, m, dim))
    a_sum = np.zeros((dim, dim))
    for k1 in range(m):
        # delta[k2, l] = f(x_k1, y_l) - f(x_k2, y_l), so g((k1, l1), (k2, l2)) = delta[k2, l1] - delta[k2, l2].
        delta = table[k1][None, :, :] - table
        for start in range(0, m, chunk):
            rows = slice(start, min(start + chunk, m))
            block = delta[rows]
            g = block[:, :, None, :] - block[:, None, :, :]
            lin = g.dot(theta)
            lower = expit(-lin)
            second = weights[rows][:, None, :]
            s[k1] += np.einsum('cjk,cjkp->jp', lower * second, g)
            mass = (lower * expit(lin) * second * weights[k1][None, :, None]).reshape(-1)
            flat = g.reshape(-1, dim)
            a_sum += (flat * mass[:, None]).T.dot(flat)

    flat_s = s.reshape(-1, dim)
    sigma = (flat_s * weights.reshape(-1)[:, None]).T.dot(flat_s)
    return symmetrize(sigma), symmetrize(.5 * a_sum)


def sigma_matrix(grid, spec=None, theta=None):
    return asymptotic_matrices(grid, spec, theta)[0]


def a_matrix(grid, spec=None, theta=None):
    return asymptotic_matrices(grid, spec, theta)[1]


def gamma_matrix(spec, m=DEFAULT_GRID):
    """Return `Gamma = int f f^T` for a doubly centered spec by midpoint quadrature.

    # Raises
        NotCenteredError: If `spec.centered_flag` is false; center it with `center_components` first.
    """
    if not spec.centered_flag:
        raise NotCenteredError('gamma_matrix needs doubly centered components (not_centered); '
                               'apply center_components to {} first.'.format(spec))
    return gram_matrix(spec, m)


def asymptotic_ple_cov(grid, spec=None, theta=None):
    """Return the asymptotic covariance `A^{-1} Sigma A^{-1}` of `sqrt(n) (theta_hat_PL - theta)`.

    # Raises
        SingularMatrixError: If `A` is singular.
    """
    sigma, a = asymptotic_matrices(grid, spec, theta)
    a_inv = inverse_psd(a, name='A(theta)')
    return symmetrize(a_inv.dot(sigma).dot(a_inv))
