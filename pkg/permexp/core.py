# -*- coding: utf-8 -*-
from __future__ import division

import numpy as np

from permexp.util import as_vector, midpoint_grid, node_grid


DEFAULT_RESOLUTION = 512
CENTERING_TOL = 1e-9
INDEPENDENCE_TOL = 1e-9


class StatisticComponent(object):
    """Abstract base class for a scalar statistic function `f_r` on the unit square.

    The model on permutations of size `n` only ever evaluates a component at points of the form
    `(i/n, a/n)`, but the limiting computations integrate it over `[0, 1]^2`, so a component must
    be defined (finite and bounded) on the whole square.

    To implement your own component, you have to implement the following methods:

    - `__call__`

    and you may override `outer` if evaluating on a product grid can be done faster than by
    broadcasting.
    """
    name = None
    # `True` when the component is doubly centered by construction, `None` to decide numerically.
    centered = None

    def __call__(self, x, y):
        """Evaluate the component at broadcast arrays `x` and `y`."""
        raise NotImplementedError()

    def outer(self, xs, ys):
        """Evaluate the component on the product grid `xs x ys`.

        # Arguments
            xs (np.ndarray): 1-D array of first coordinates.
            ys (np.ndarray): 1-D array of second coordinates.

        # Returns
            Array of shape `(len(xs), len(ys))`.
        """
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        return self(xs[:, None], ys[None, :])

    def get_config(self):
        return {'name': self.name}


class ProductComponent(StatisticComponent):
    """`f(x, y) = xy` (Spearman's rank correlation)."""
    name = 'xy'

    def __call__(self, x, y):
        return np.asarray(x, dtype=np.float64) * np.asarray(y, dtype=np.float64)


class NegAbsDiffComponent(StatisticComponent):
    """`f(x, y) = -|x - y|` (Spearman's footrule)."""
    name = 'neg_abs_diff'

    def __call__(self, x, y):
        return -np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))


class NegSqDiffComponent(StatisticComponent):
    """`f(x, y) = -(x - y)^2`."""
    name = 'neg_sq_diff'

    def __call__(self, x, y):
        return -np.square(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))


class ScaledComponent(StatisticComponent):
    def __init__(self, base, factor):
        self.base = base
        self.factor = float(factor)
        self.name = '{}*{}'.format(self.factor, base.name)
        self.centered = base.centered

    def __call__(self, x, y):
        return self.factor * self.base(x, y)

    def outer(self, xs, ys):
        return self.factor * self.base.outer(xs, ys)

    def get_config(self):
        return {'name': 'scaled', 'factor': self.factor, 'base': self.base.get_config()}


class TabulatedComponent(StatisticComponent):
    """A component given by its values on the `m x m` midpoint grid.

    Off the grid the values are bilinearly interpolated; beyond the outermost midpoints the
    edge cells are extended linearly, so a bilinear function is reproduced exactly everywhere.

    # Arguments
        values (np.ndarray): `m x m` array, `values[k, l] = f((k + 1/2)/m, (l + 1/2)/m)`.
        name (str): Optional label.
    """
    def __init__(self, values, name='tabulated'):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 2:
            raise ValueError('Tabulated values must be a square array with m >= 2, has shape {}'.format(values.shape))
        if not np.all(np.isfinite(values)):
            raise ValueError('Tabulated values must be finite.')
        values.flags.writeable = False
        self.values = values
        self.m = values.shape[0]
        self.name = name

    @classmethod
    def from_function(cls, fn, m, name='tabulated'):
        """Tabulate the vectorized function `fn(x, y)` on the `m x m` midpoint grid."""
        q = midpoint_grid(m)
        return cls(fn(q[:, None], q[None, :]), name=name)

    def _locate(self, t):
        u = np.asarray(t, dtype=np.float64) * self.m - .5
        k = np.clip(np.floor(u), 0, self.m - 2).astype(np.intp)
        return k, u - k

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
        k, s = self._locate(x)
        l, t = self._locate(y)
        v = self.values
        return ((1. - s) * (1. - t) * v[k, l] + s * (1. - t) * v[k + 1, l] +
                (1. - s) * t * v[k, l + 1] + s * t * v[k + 1, l + 1])

    def get_config(self):
        return {'name': self.name, 'm': self.m}


class CenteredComponent(StatisticComponent):
    """Doubly centered version of `base`: `f(x, y) - r(x) - c(y) + g`.

    Row averages `r`, column averages `c` and the grand average `g` are taken over the
    quadrature `points`. Since the shifts are additive in `x` and `y`, pair differences are
    unchanged up to rounding.

    # Arguments
        base (StatisticComponent): The component to center.
        points (np.ndarray): Quadrature points on `[0, 1]`.
        centered (bool): `True` if the shifts make `f` doubly centered on the midpoint grid, `None`
            to check numerically.
    """
    def __init__(self, base, points, centered=True):
        self.base = base
        self.centered = centered
        self.points = np.asarray(points, dtype=np.float64)
        self.name = 'centered({})'.format(base.name)
        self.grand_mean = float(np.mean(base.outer(self.points, self.points)))

    def row_means(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        return np.mean(self.base(xs[..., None], self.points), axis=-1)

    def col_means(self, ys):
        ys = np.asarray(ys, dtype=np.float64)
        return np.mean(self.base(self.points, ys[..., None]), axis=-1)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return self.base(x, y) - self.row_means(x) - self.col_means(y) + self.grand_mean

    def outer(self, xs, ys):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        return (self.base.outer(xs, ys) - self.row_means(xs)[:, None] -
                self.col_means(ys)[None, :] + self.grand_mean)

    def get_config(self):
        return {'name': 'centered', 'base': self.base.get_config(), 'resolution': len(self.points)}


BUILTIN_COMPONENTS = {
    'xy': ProductComponent,
    'neg_abs_diff': NegAbsDiffComponent,
    'neg_sq_diff': NegSqDiffComponent,
}


def get_component(name):
    if name not in BUILTIN_COMPONENTS:
        raise ValueError('Unknown statistic "{}", choose from {}.'.format(name, sorted(BUILTIN_COMPONENTS)))
    return BUILTIN_COMPONENTS[name]()


def is_centered(component, resolution=DEFAULT_RESOLUTION, tol=CENTERING_TOL):
    """Check the doubly centered conditions on the midpoint grid."""
    if component.centered is not None:
        return bool(component.centered)
    q = midpoint_grid(resolution)
    values = component.outer(q, q)
    return bool(max(np.max(np.abs(values.mean(axis=0))), np.max(np.abs(values.mean(axis=1)))) < tol)


class StatisticSpec(object):
    """The vector statistic `f = (f_1, ..., f_L)` that defines the exponential family.

    A permutation `pi` of size `n` has sufficient statistic `T(pi) = sum_i f(i/n, pi(i)/n)` and
    probability proportional to `exp(theta^T T(pi))`. Instances are immutable and may be shared
    between processes.

    # Arguments
        components (list of `StatisticComponent` or str): The `L` components; strings name
            built-ins (`xy`, `neg_abs_diff`, `neg_sq_diff`).

    # Attributes
        dimension (int): `L`.
        centered_flag (bool): `True` if every component is doubly centered.
    """
    def __init__(self, components):
        if isinstance(components, (str, StatisticComponent)):
            components = [components]
        components = tuple(get_component(c) if isinstance(c, str) else c for c in components)
        if len(components) < 1:
            raise ValueError('A statistic needs at least one component.')
        for component in components:
            if not isinstance(component, StatisticComponent):
                raise ValueError('Invalid component {!r}.'.format(component))
            if component.centered is None:
                values = component.outer(midpoint_grid(64), midpoint_grid(64))
                if not np.all(np.isfinite(values)):
                    raise ValueError('Component "{}" is not finite on the unit square.'.format(component.name))
        self.components = components
        self.dimension = len(components)
        self.centered_flag = all(is_centered(c) for c in components)

    @classmethod
    def parse(cls, text):
        """Build a spec from a comma separated list of built-in names, e.g. `"xy,neg_abs_diff"`."""
        names = [name.strip() for name in text.split(',') if name.strip()]
        return cls(names)

    @property
    def names(self):
        return [c.name for c in self.components]

    def evaluate(self, x, y):
        """Return `f(x, y)` with the component index as last axis."""
        return np.stack([c(x, y) for c in self.components], axis=-1)

    def outer(self, xs, ys):
        """Return `f` on the grid `xs x ys`, shape `(len(xs), len(ys), L)`."""
        return np.stack([c.outer(xs, ys) for c in self.components], axis=-1)

    def scaled(self, factor):
        return StatisticSpec([ScaledComponent(c, factor) for c in self.components])

    def get_config(self):
        return {
            'dimension': self.dimension,
            'components': [c.get_config() for c in self.components],
            'centered': self.centered_flag,
        }

    def __repr__(self):
        return 'StatisticSpec({})'.format(','.join(self.names))


class Permutation(object):
    """A bijection of `{1, ..., n}`.

    Images are 1-indexed externally (`images`) and 0-indexed internally (`index`).
    """
    def __init__(self, images):
        images = np.array(images)
        if images.ndim != 1 or images.shape[0] < 1:
            raise ValueError('A permutation needs a non-empty 1-D sequence of images.')
        if not np.issubdtype(images.dtype, np.integer):
            if not np.all(images == np.round(images)):
                raise ValueError('Permutation images must be integers.')
        index = images.astype(np.intp) - 1
        if not np.array_equal(np.sort(index), np.arange(index.shape[0])):
            raise ValueError('{} is not a permutation of 1..{}.'.format(images.tolist(), index.shape[0]))
        index.flags.writeable = False
        self.index = index

    @classmethod
    def identity(cls, n):
        return cls(np.arange(1, n + 1))

    @classmethod
    def from_index(cls, index):
        return cls(np.asarray(index) + 1)

    @property
    def n(self):
        return self.index.shape[0]

    @property
    def images(self):
        return self.index + 1

    def __call__(self, i):
        """Return `pi(i)` for a 1-indexed `i`."""
        return int(self.index[i - 1]) + 1

    def __len__(self):
        return self.n

    def transposed(self, i, j):
        """Return `pi o (i j)`, i.e. the permutation with the images of `i` and `j` exchanged."""
        index = self.index.copy()
        index[i - 1], index[j - 1] = index[j - 1], index[i - 1]
        return Permutation.from_index(index)

    def inverse(self):
        return Permutation.from_index(np.argsort(self.index))

    def to_line(self):
        return ' '.join(str(v) for v in self.images)

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.index, other.index)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(tuple(self.index.tolist()))

    def __repr__(self):
        return 'Permutation({})'.format(self.images.tolist())


def as_theta(values, spec):
    """Validate a natural parameter against `spec` and return it as a float array."""
    dimension = spec if isinstance(spec, int) else spec.dimension
    return as_vector(values, dimension=dimension, name='theta')


def read_permutations(path):
    """Read permutations, one per line of space separated 1-indexed images."""
    permutations = []
    with open(path, 'r') as f:
        for line in f:
            if line.strip():
                permutations.append(Permutation([int(v) for v in line.split()]))
    return permutations


def read_permutation(path):
    permutations = read_permutations(path)
    if len(permutations) != 1:
        raise ValueError('Expected exactly one permutation in "{}", found {}.'.format(path, len(permutations)))
    return permutations[0]


def write_permutations(path, permutations):
    with open(path, 'w') as f:
        for permutation in permutations:
            f.write(permutation.to_line() + '\n')


def read_tabulated_spec(path):
    """Read a tabulated statistic: header `m L`, then `m*m` lines of `L` reals (x-major)."""
    with open(path, 'r') as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ValueError('Tabulated statistic header must be "m L", got {!r}.'.format(header))
        m, dimension = int(header[0]), int(header[1])
        values = np.loadtxt(f, dtype=np.float64, ndmin=2)
    if values.shape != (m * m, dimension):
        raise ValueError('Expected {} rows of {} values, got shape {}.'.format(m * m, dimension, values.shape))
    values = values.reshape(m, m, dimension)
    return StatisticSpec([TabulatedComponent(values[:, :, r], name='tabulated[{}]'.format(r))
                          for r in range(dimension)])


def write_tabulated_spec(path, spec, m):
    q = midpoint_grid(m)
    values = spec.outer(q, q).reshape(m * m, spec.dimension)
    with open(path, 'w') as f:
        f.write('{} {}\n'.format(m, spec.dimension))
        for row in values:
            f.write(' '.join(repr(float(v)) for v in row) + '\n')


def sufficient_statistic(spec, permutation):
    """Return `T(pi) = sum_i f(i/n, pi(i)/n)` as an array of length `L`."""
    n = permutation.n
    return spec.evaluate(node_grid(n), permutation.images / n).sum(axis=0)


def _check_pair(n, i, j):
    if i == j:
        raise ValueError('Pair indices must differ, got i = j = {}.'.format(i))
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError('Pair indices must lie in 1..{}, got ({}, {}).'.format(n, i, j))


def pair_difference(spec, permutation, i, j):
    """Return `y_pi(i, j)`, the change of the exponent's statistic when undoing the swap of `i` and `j`.

    # Arguments
        spec (StatisticSpec): The statistic.
        permutation (Permutation): The permutation `pi`.
        i, j (int): Distinct 1-indexed positions.

    # Returns
        `f(i/n, pi(i)/n) + f(j/n, pi(j)/n) - f(i/n, pi(j)/n) - f(j/n, pi(i)/n)`, length `L`.
    """
    n = permutation.n
    _check_pair(n, i, j)
    xi, xj = i / n, j / n
    yi, yj = permutation(i) / n, permutation(j) / n
    values = spec.evaluate(np.array([xi, xj, xi, xj]), np.array([yi, yj, yj, yi]))
    # Grouped as (a + b) - (c + d) so that y(i, j) == y(j, i) and y_{pi o (i j)} == -y_pi bitwise.
    return (values[0] + values[1]) - (values[2] + values[3])


def g_kernel(spec, z1, z2):
    """Return `g(z1, z2) = f(x1, y1) + f(x2, y2) - f(x1, y2) - f(x2, y1)`."""
    (x1, y1), (x2, y2) = z1, z2
    for t in (x1, y1, x2, y2):
        if not 0. <= t <= 1.:
            raise ValueError('Points must lie in the unit square, got {} and {}.'.format(z1, z2))
    values = spec.evaluate(np.array([x1, x2, x1, x2], dtype=np.float64),
                           np.array([y1, y2, y2, y1], dtype=np.float64))
    return (values[0] + values[1]) - (values[2] + values[3])


def center_components(spec, resolution=DEFAULT_RESOLUTION, grid='midpoint'):
    """Project every component onto the doubly centered class.

    # Arguments
        spec (StatisticSpec): Spec to center.
        resolution (int): Number of quadrature points per axis.
        grid (str): `'midpoint'` for `(k + 1/2)/m` or `'nodes'` for `k/m`, `k = 1..m`.

    # Returns
        A new `StatisticSpec`. `centered_flag` is set for the midpoint grid and checked numerically
        otherwise.
    """
    if grid == 'midpoint':
        points = midpoint_grid(resolution)
    elif grid == 'nodes':
        points = node_grid(resolution)
    else:
        raise ValueError('grid must be "midpoint" or "nodes", is "{}"'.format(grid))
    # Node averages differ from midpoint averages, so only the midpoint grid is centered by construction.
    centered = True if grid == 'midpoint' else None
    return StatisticSpec([CenteredComponent(c, points, centered=centered) for c in spec.components])


def gram_matrix(spec, resolution=DEFAULT_RESOLUTION):
    """Return `int f_p f_q` over the unit square by midpoint quadrature."""
    q = midpoint_grid(resolution)
    values = spec.outer(q, q)
    gram = np.einsum('klp,klq->pq', values, values) / float(resolution * resolution)
    return .5 * (gram + gram.T)


def check_linear_independence(spec, resolution=DEFAULT_RESOLUTION):
    """Return the smallest eigenvalue of the Gram matrix of the centered components.

    Terms `a(x) + b(y)` do not change the model, so they are projected out first. The model is
    identified when the result is > 1e-9; e.g. `[xy, neg_sq_diff]` is not, since
    `-(x - y)^2 = 2xy - x^2 - y^2`.
    """
    centered = center_components(spec, resolution)
    return float(np.linalg.eigvalsh(gram_matrix(centered, resolution))[0])
