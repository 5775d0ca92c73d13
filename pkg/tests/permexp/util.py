import itertools

import numpy as np
from scipy.special import expit

from permexp.core import StatisticComponent, pair_difference


class RowOnlyComponent(StatisticComponent):
    """`f(x, y) = x`: every pair difference vanishes exactly."""
    name = 'row_only'

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
        return x.copy()


class ShiftedComponent(StatisticComponent):
    """`f(x, y) + x^2 + cos(3y)`, the same model as `f` on every S_n."""
    def __init__(self, base):
        self.base = base
        self.name = 'shifted({})'.format(base.name)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return self.base(x, y) + np.square(x) + np.cos(3. * y)


def all_pair_differences(spec, permutation):
    n = permutation.n
    return np.array([pair_difference(spec, permutation, i, j)
                     for i, j in itertools.combinations(range(1, n + 1), 2)])


def naive_sigma_hat(spec, permutation, theta, absolute=False):
    """Sum over ordered pairs of distinct edges that share exactly one index.

    With `absolute=True` the terms enter with their absolute values, which bounds the rounding
    error of any order of summation.
    """
    n = permutation.n
    edges = list(itertools.combinations(range(1, n + 1), 2))
    t = {}
    for i, j in edges:
        y = pair_difference(spec, permutation, i, j)
        t[(i, j)] = y * expit(-np.dot(theta, y))
        if absolute:
            t[(i, j)] = np.abs(t[(i, j)])
    total = np.zeros((spec.dimension, spec.dimension))
    for e1 in edges:
        for e2 in edges:
            if len(set(e1) & set(e2)) == 1:
                total += np.outer(t[e1], t[e2])
    return total / float(n) ** 3
