from __future__ import division
import numpy as np
from scipy import special, stats

from permexp.errors import SingularMatrixError


def midpoint_grid(m):
    """Return the `m` cell midpoints `(k + 1/2) / m` of the unit interval."""
    if m < 1:
        raise ValueError('grid resolution must be >= 1, is {}'.format(m))
    return (np.arange(m, dtype=np.float64) + .5) / m


def node_grid(n):
    """Return the `n` nodes `i / n` for `i = 1, ..., n`."""
    if n < 1:
        raise ValueError('n must be >= 1, is {}'.format(n))
    return np.arange(1, n + 1, dtype=np.float64) / n


def log1pexp(x):
    # log(1 + e^x) without overflow; np.logaddexp branches on the sign of x.
    return np.logaddexp(0., x)


def keep_weight(s):
    """Return e^s / (1 + e^s), the probability of keeping the current pair."""
    return special.expit(s)


def swap_weight(s):
    """Return 1 / (1 + e^s)."""
    return special.expit(-s)


def symmetrize(matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    return .5 * (matrix + matrix.T)


def inverse_psd(matrix, floor=1e-12, max_condition=1e12, name='matrix'):
    """Invert a symmetric positive (semi)definite matrix through its eigendecomposition.

    # Arguments
        matrix (np.ndarray): Symmetric `L x L` matrix.
        floor (float): Eigenvalues below `floor * ||matrix||` count as zero.
        max_condition (float): Largest accepted condition number.
        name (str): Used in the error message.

    # Returns
        The inverse, symmetric by construction.

    # Raises
        SingularMatrixError: If an eigenvalue is below the floor or the condition number
            exceeds `max_condition`.
    """
    matrix = symmetrize(np.atleast_2d(matrix))
    eigvals, eigvecs = np.linalg.eigh(matrix)
    scale = np.max(np.abs(eigvals)) if eigvals.size else 0.
    if scale == 0. or eigvals[0] <= floor * scale:
        raise SingularMatrixError('{} is singular (eigenvalues {})'.format(name, eigvals))
    condition = eigvals[-1] / eigvals[0]
    if condition > max_condition:
        raise SingularMatrixError('{} is ill-conditioned (condition number {:.3e})'.format(name, condition))
    inverse = (eigvecs / eigvals[None, :]).dot(eigvecs.T)
    return symmetrize(inverse)


def normal_quantile(p):
    """Return the `p`-quantile of the standard normal distribution."""
    return stats.norm.ppf(p)


def total_variation(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    assert p.shape == q.shape
    return .5 * np.sum(np.abs(p - q))


def as_vector(values, dimension=None, name='vector'):
    """Convert `values` (scalar, sequence or comma separated string) to a finite 1-D float array."""
    if isinstance(values, str):
        values = [float(v) for v in values.split(',') if v.strip()]
    vector = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if vector.ndim != 1:
        raise ValueError('{} must be one-dimensional, has shape {}'.format(name, vector.shape))
    if dimension is not None and vector.shape[0] != dimension:
        raise ValueError('{} has length {} but the statistic has dimension {}'.format(
            name, vector.shape[0], dimension))
    if not np.all(np.isfinite(vector)):
        raise ValueError('{} must be finite, is {}'.format(name, vector))
    return vector


# Based on https://github.com/openai/baselines/blob/master/baselines/common/mpi_running_mean_std.py
class RunningMoments(object):
    def __init__(self, shape=(), dtype=np.float64):
        self.shape = shape
        self.dtype = dtype

        self._sum = np.zeros(shape, dtype=dtype)
        self._sumsq = np.zeros(shape, dtype=dtype)
        self._count = 0

        self.mean = np.zeros(shape, dtype=dtype)
        self.std = np.zeros(shape, dtype=dtype)

    @property
    def count(self):
        return self._count

    def update(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == len(self.shape):
            x = x.reshape(-1, *self.shape)
        assert x.shape[1:] == self.shape
        # Failed replications are reported as NaN and do not enter the moments.
        x = x[np.all(np.isfinite(x.reshape(x.shape[0], -1)), axis=1)]
        if x.shape[0] == 0:
            return

        self._count += x.shape[0]
        self._sum += np.sum(x, axis=0)
        self._sumsq += np.sum(np.square(x), axis=0)

        self.mean = self._sum / float(self._count)
        self.std = np.sqrt(np.maximum(0., self._sumsq / float(self._count) - np.square(self.mean)))
