from __future__ import division
from collections import namedtuple
import warnings

import numpy as np

from permexp.core import as_theta, node_grid
from permexp.errors import DegenerateError, NoBracketError
from permexp.util import log1pexp, swap_weight, keep_weight, symmetrize


DEFAULT_TOL = 1e-10
DEFAULT_BLOCK_SIZE = 256
MAX_NEWTON_ITERATIONS = 100
MAX_BRACKET_EXPONENT = 30
DEGENERACY_TOL = 1e-12
# Relative slack under which a backtracking step still counts as a decrease.
DECREASE_SLACK = 1e-13

SolveReport = namedtuple('SolveReport', 'root, iterations, gradient_norm, converged, condition_number, method')


class PLObjective(object):
    """Log pseudo-likelihood of one observed permutation as a function of `theta`.

    The permutation only enters through the pair differences `y_pi(i, j)`, `i < j`. They are
    never stored as an `n^2 x L` array: pairs are visited in fixed row tiles of `block_size`
    rows and each tile's `y` values are rebuilt from two cached tables, so every evaluation
    costs `O(n^2 L)` time and `O(n * block_size * L)` memory. Tiles are reduced in a fixed
    order, so results do not depend on how the work is scheduled.

    # Arguments
        spec (StatisticSpec): The statistic.
        permutation (Permutation): The observed permutation.
        block_size (int): Number of rows per tile.
    """
    def __init__(self, spec, permutation, block_size=DEFAULT_BLOCK_SIZE):
        if block_size < 1:
            raise ValueError('block_size must be >= 1, is {}'.format(block_size))
        self.spec = spec
        self.permutation = permutation
        self.block_size = int(block_size)
        self.n = permutation.n
        self.nb_gradient_evaluations = 0
        self.nb_hessian_evaluations = 0
        self.nb_objective_evaluations = 0

        self._x = node_grid(self.n)
        self._y = permutation.images / self.n
        # diagonal[i] = f(i/n, pi(i)/n)
        self.diagonal = spec.evaluate(self._x, self._y)

    @property
    def nb_pairs(self):
        return self.n * (self.n - 1) // 2

    def row_blocks(self):
        """Yield `(rows, Y)` with `Y[a, b] = y_pi(rows[a], b)` for all `b`, zero where `b == rows[a]`."""
        for start in range(0, self.n, self.block_size):
            rows = np.arange(start, min(start + self.block_size, self.n))
            cross = self.spec.outer(self._x[rows], self._y)
            cross_t = np.swapaxes(self.spec.outer(self._x, self._y[rows]), 0, 1)
            values = ((self.diagonal[rows][:, None, :] + self.diagonal[None, :, :]) -
                      (cross + cross_t))
            values[np.arange(len(rows)), rows, :] = 0.
            yield rows, values

    def pair_blocks(self):
        """Yield `(L,)`-stacked arrays of `y_pi(i, j)` over unordered pairs `i < j`, tile by tile."""
        columns = np.arange(self.n)
        for rows, values in self.row_blocks():
            upper = columns[None, :] > rows[:, None]
            yield values[upper]

    def neg_log(self, theta):
        """Return `-log PL_n(pi, theta) = sum_{i<j} log(1 + e^{-theta.y})`."""
        theta = as_theta(theta, self.spec)
        self.nb_objective_evaluations += 1
        total = 0.
        for ys in self.pair_blocks():
            total += np.sum(log1pexp(-ys.dot(theta)))
        return float(total)

    def gradient(self, theta):
        """Return `L_n(pi, theta) = sum_{i<j} y / (1 + e^{theta.y})`, the gradient of `log PL_n`."""
        theta = as_theta(theta, self.spec)
        self.nb_gradient_evaluations += 1
        total = np.zeros(self.spec.dimension)
        for ys in self.pair_blocks():
            total += swap_weight(ys.dot(theta)).dot(ys)
        return total

    def hessian(self, theta):
        """Return the unscaled Hessian of `-log PL_n`, `sum_{i<j} y y^T e^{theta.y} / (1 + e^{theta.y})^2`.

        Divide by `n^2` to obtain the plug-in matrix `A_hat`.
        """
        theta = as_theta(theta, self.spec)
        self.nb_hessian_evaluations += 1
        total = np.zeros((self.spec.dimension, self.spec.dimension))
        for ys in self.pair_blocks():
            s = ys.dot(theta)
            weights = keep_weight(s) * swap_weight(s)
            total += (ys * weights[:, None]).T.dot(ys)
        return symmetrize(total)

    def evaluate(self, theta):
        """Return `(neg_log, gradient of neg_log, hessian)` from a single pass over the pairs."""
        theta = as_theta(theta, self.spec)
        dim = self.spec.dimension
        value, grad, hess = 0., np.zeros(dim), np.zeros((dim, dim))
        for ys in self.pair_blocks():
            s = ys.dot(theta)
            lower = swap_weight(s)
            value += np.sum(log1pexp(-s))
            grad -= lower.dot(ys)
            hess += (ys * (keep_weight(s) * lower)[:, None]).T.dot(ys)
        self.nb_objective_evaluations += 1
        self.nb_gradient_evaluations += 1
        self.nb_hessian_evaluations += 1
        return float(value), grad, symmetrize(hess)

    def get_config(self):
        return {
            'n': self.n,
            'block_size': self.block_size,
            'spec': self.spec.get_config(),
            'nb_objective_evaluations': self.nb_objective_evaluations,
            'nb_gradient_evaluations': self.nb_gradient_evaluations,
            'nb_hessian_evaluations': self.nb_hessian_evaluations,
        }


def pl_gradient(spec, permutation, theta):
    return PLObjective(spec, permutation).gradient(theta)


def pl_neg_log(spec, permutation, theta):
    return PLObjective(spec, permutation).neg_log(theta)


def pl_hessian(spec, permutation, theta):
    return PLObjective(spec, permutation).hessian(theta)


def _scaled_norm(gradient, n):
    return float(np.linalg.norm(gradient)) / n ** 1.5


def _condition_number(hessian):
    eigvals = np.linalg.eigvalsh(hessian)
    if eigvals[0] <= 0.:
        return np.inf
    return float(eigvals[-1] / eigvals[0])


def _check_identified(objective, hessian_at_zero):
    # At theta = 0 every pair has weight 1/4, so H(0) = (1/4) sum y y^T only depends on the data.
    n = objective.n
    eigvals = np.linalg.eigvalsh(hessian_at_zero)
    if eigvals[0] <= DEGENERACY_TOL * n * n:
        raise DegenerateError('The pair differences lie in a proper subspace (smallest Hessian eigenvalue '
                              '{:.3e}); the pseudo-likelihood has no unique maximizer.'.format(eigvals[0]))


def _check_sign_change(objective):
    # One-signed y: the scalar gradient never vanishes, it only decays as |theta| grows.
    lowest, highest = np.inf, -np.inf
    for ys in objective.pair_blocks():
        if ys.size:
            lowest = min(lowest, float(ys.min()))
            highest = max(highest, float(ys.max()))
    if lowest >= 0. or highest <= 0.:
        raise NoBracketError('All pair differences have the same sign, so the scalar gradient does not change '
                             'sign on [-2^{0}, 2^{0}].'.format(MAX_BRACKET_EXPONENT))


def _bisect_scalar(objective, tol):
    # The scalar gradient of log PL_n is nonincreasing in theta.
    n = objective.n
    lo = hi = None
    for k in range(MAX_BRACKET_EXPONENT + 1):
        bound = 2. ** k
        if objective.gradient([-bound])[0] > 0. and objective.gradient([bound])[0] < 0.:
            lo, hi = -bound, bound
            break
    if lo is None:
        raise NoBracketError('The scalar gradient does not change sign on [-2^{0}, 2^{0}].'.format(MAX_BRACKET_EXPONENT))

    iterations = 0
    mid = .5 * (lo + hi)
    gradient = objective.gradient([mid])
    collapsed = False
    while _scaled_norm(gradient, n) > tol:
        if gradient[0] > 0.:
            lo = mid
        else:
            hi = mid
        mid = .5 * (lo + hi)
        iterations += 1
        if not lo < mid < hi:
            # The bracket holds two adjacent floats: the root is resolved to machine precision.
            collapsed = True
            break
        gradient = objective.gradient([mid])
    return np.array([mid]), gradient, iterations, collapsed


def solve_ple(spec, permutation, theta_init=None, tol=DEFAULT_TOL, max_iter=MAX_NEWTON_ITERATIONS,
              block_size=DEFAULT_BLOCK_SIZE):
    """Find the pseudo-likelihood estimator, the root of `L_n(pi, theta) = 0`.

    Damped Newton on the convex `-log PL_n`: the step `H^{-1} L_n` is halved until the objective
    does not increase. Convergence is declared once `||L_n|| / n^{3/2} <= tol`. For `L = 1` a
    bisection over the brackets `[-2^k, 2^k]` takes over if Newton stalls.

    # Arguments
        spec (StatisticSpec): The statistic.
        permutation (Permutation): The observed permutation.
        theta_init (array-like): Starting point, zero by default.
        tol (float): Tolerance on the scaled gradient norm.
        max_iter (int): Maximum number of Newton iterations.

    # Returns
        A `SolveReport`. `converged` is `False` if neither Newton nor bisection reached `tol`.

    # Raises
        DegenerateError: If the pair differences do not span `R^L`.
        NoBracketError: If `L = 1` and the gradient keeps its sign on `[-2^30, 2^30]`.
    """
    objective = PLObjective(spec, permutation, block_size=block_size)
    n = objective.n
    dim = spec.dimension
    theta = np.zeros(dim) if theta_init is None else as_theta(theta_init, spec).copy()

    _check_identified(objective, objective.hessian(np.zeros(dim)))
    if dim == 1:
        _check_sign_change(objective)

    value, grad, hess = objective.evaluate(theta)
    iterations = 0
    stalled = False
    while _scaled_norm(grad, n) > tol and iterations < max_iter:
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            stalled = True
            break
        if not np.all(np.isfinite(step)):
            stalled = True
            break
        scale = 1.
        accepted = False
        while scale > 1e-10:
            candidate = theta + scale * step
            candidate_value = objective.neg_log(candidate)
            if candidate_value <= value + DECREASE_SLACK * max(1., abs(value)):
                accepted = True
                break
            scale *= .5
        iterations += 1
        if not accepted:
            stalled = True
            break
        theta = candidate
        value, grad, hess = objective.evaluate(theta)

    converged = _scaled_norm(grad, n) <= tol
    method = 'newton'
    if not converged and dim == 1:
        theta, grad, bisections, collapsed = _bisect_scalar(objective, tol)
        iterations += bisections
        converged = collapsed or _scaled_norm(grad, n) <= tol
        hess = objective.hessian(theta)
        method = 'bisection'
    elif not converged:
        warnings.warn('Newton {} after {} iterations with scaled gradient norm {:.3e}.'.format(
            'stalled' if stalled else 'stopped', iterations, _scaled_norm(grad, n)))

    return SolveReport(root=theta, iterations=iterations, gradient_norm=_scaled_norm(grad, n),
                       converged=bool(converged), condition_number=_condition_number(hess),
                       method=method)
