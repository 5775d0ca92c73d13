from __future__ import division
import numpy as np

from permexp.common.misc_util import make_rng
from permexp.core import (CenteredComponent, Permutation, ProductComponent, as_theta,
                          node_grid, pair_difference)
from permexp.util import keep_weight


GIBBS = 'gibbs'
HIT_AND_RUN = 'hit_and_run'
UNIFORM = 'uniform'
METHODS = (GIBBS, HIT_AND_RUN, UNIFORM)
METHOD_ALIASES = {'har': HIT_AND_RUN, 'hit-and-run': HIT_AND_RUN}
# Gibbs batches below this size are scheduled chain by chain in rounds of disjoint pairs.
LEVEL_SCHEDULE_MAX_BATCH = 32


class SamplerConfig(object):
    """Settings shared by all samplers.

    # Arguments
        method (str): One of `gibbs`, `hit_and_run` (alias `har`) or `uniform`.
        sweeps (int): Number of sweeps. For `hit_and_run` one sweep is one pass of the
            auxiliary-variable and reassignment steps.
        proposals_per_sweep (int): Pair proposals per Gibbs sweep; `None` means `n^2`.
        seed (int): Seed used when no generator is passed explicitly.
    """
    def __init__(self, method=GIBBS, sweeps=10, proposals_per_sweep=None, seed=0):
        method = METHOD_ALIASES.get(method, method)
        if method not in METHODS:
            raise ValueError('Unknown sampling method "{}", choose from {}.'.format(method, METHODS))
        if int(sweeps) < 1:
            raise ValueError('sweeps must be >= 1, is {}'.format(sweeps))
        if proposals_per_sweep is not None and int(proposals_per_sweep) < 1:
            raise ValueError('proposals_per_sweep must be >= 1, is {}'.format(proposals_per_sweep))
        if int(seed) < 0 or int(seed) >= 2 ** 64:
            raise ValueError('seed must be an unsigned 64-bit integer, is {}'.format(seed))
        self.method = method
        self.sweeps = int(sweeps)
        self.proposals_per_sweep = None if proposals_per_sweep is None else int(proposals_per_sweep)
        self.seed = int(seed)

    def nb_proposals(self, n):
        if self.proposals_per_sweep is not None:
            return self.proposals_per_sweep
        return n * n

    def get_config(self):
        return {
            'method': self.method,
            'sweeps': self.sweeps,
            'proposals_per_sweep': self.proposals_per_sweep,
            'seed': self.seed,
        }


def uniform_permutation(n, rng=None):
    """Draw a permutation of size `n` uniformly at random (in-place Fisher-Yates shuffle)."""
    if n < 1:
        raise ValueError('n must be >= 1, is {}'.format(n))
    rng = make_rng(rng)
    images = np.arange(1, n + 1)
    rng.shuffle(images)
    return Permutation(images)


def uniform_permutations(n, size, rng=None):
    """Draw `size` independent uniform permutations; returns 1-indexed images of shape `(size, n)`."""
    if n < 1:
        raise ValueError('n must be >= 1, is {}'.format(n))
    rng = make_rng(rng)
    return rng.permuted(np.tile(np.arange(1, n + 1), (size, 1)), axis=1)


def gibbs_keep_probability(spec, theta, permutation, i, j):
    """Conditional probability that positions `i` and `j` keep their current images.

    Given all other images, `{pi(i), pi(j)}` is either kept or exchanged, and it is kept with
    probability `e^{theta.y} / (1 + e^{theta.y})` where `y = y_pi(i, j)`.
    """
    theta = as_theta(theta, spec)
    return float(keep_weight(np.dot(theta, pair_difference(spec, permutation, i, j))))


def gibbs_step(spec, theta, permutation, i, j, rng=None):
    """Heat-bath update of the pair `(i, j)`; returns `pi` or `pi o (i j)`."""
    rng = make_rng(rng)
    keep = gibbs_keep_probability(spec, theta, permutation, i, j)
    if rng.random() < keep:
        return permutation
    return permutation.transposed(i, j)


def _disjoint_rounds(first, second, n):
    """Group proposals into rounds whose pairs share no position.

    A proposal goes one round after the latest earlier proposal touching either of its positions.
    Proposals in one round commute, and every earlier proposal they depend on sits in an earlier
    round, so applying the rounds in order reproduces the sequential scan exactly.
    """
    last = [0] * n
    levels = []
    for i, j in zip(first.tolist(), second.tolist()):
        level = max(last[i], last[j]) + 1
        last[i] = last[j] = level
        levels.append(level)
    levels = np.asarray(levels, dtype=np.int64)
    order = np.argsort(levels, kind='stable')
    bounds = np.cumsum(np.bincount(levels))
    return [order[bounds[k - 1]:bounds[k]] for k in range(1, len(bounds))]


def _scheduled_sweep(index, weights, first, second, uniforms):
    # `index` is one chain, updated in place.
    for updates in _disjoint_rounds(first, second, index.shape[0]):
        i, j = first[updates], second[updates]
        pi_i, pi_j = index[i], index[j]
        s = (weights[i, pi_i] + weights[j, pi_j]) - (weights[i, pi_j] + weights[j, pi_i])
        swap = uniforms[updates] >= keep_weight(s)
        index[i[swap]] = pi_j[swap]
        index[j[swap]] = pi_i[swap]


def _lockstep_sweep(index, weights, first, second, uniforms):
    # One proposal at a time, vectorized across the chains.
    rows = np.arange(index.shape[0])
    for t in range(first.shape[0]):
        i, j = first[t], second[t]
        pi_i, pi_j = index[rows, i], index[rows, j]
        s = (weights[i, pi_i] + weights[j, pi_j]) - (weights[i, pi_j] + weights[j, pi_i])
        swap = uniforms[t] >= keep_weight(s)
        if np.any(swap):
            swapped = rows[swap]
            index[swapped, i[swap]] = pi_j[swap]
            index[swapped, j[swap]] = pi_i[swap]


def gibbs_sample_batch(spec, theta, n, config, size, rng=None):
    """Run `size` independent Gibbs chains started from uniform permutations.

    Each sweep performs `config.nb_proposals(n)` heat-bath updates at pairs `(i, j)` drawn
    uniformly from the ordered pairs with `i != j`. Batches of at least `LEVEL_SCHEDULE_MAX_BATCH`
    chains step all chains together one proposal at a time, which costs one vectorized update per
    proposal. Smaller batches group each chain's proposals into rounds of disjoint pairs and apply
    a round at once: about `O(n)` vectorized updates per sweep plus a scalar scheduling pass over
    the proposals. Both paths consume the same random draws and return identical chains.

    # Returns
        1-indexed images of shape `(size, n)`.
    """
    theta = as_theta(theta, spec)
    rng = make_rng(config.seed if rng is None else rng)
    index = uniform_permutations(n, size, rng) - 1
    if n == 1:
        return index + 1

    nodes = node_grid(n)
    # weights[a, b] = theta . f((a + 1)/n, (b + 1)/n)
    weights = spec.outer(nodes, nodes).dot(theta)
    proposals = config.nb_proposals(n)
    for _ in range(config.sweeps):
        first = rng.integers(n, size=(proposals, size))
        second = (first + rng.integers(1, n, size=(proposals, size))) % n
        uniforms = rng.random((proposals, size))
        if size < LEVEL_SCHEDULE_MAX_BATCH:
            for chain in range(size):
                _scheduled_sweep(index[chain], weights, first[:, chain], second[:, chain], uniforms[:, chain])
        else:
            _lockstep_sweep(index, weights, first, second, uniforms)
    return index + 1


def gibbs_sample(spec, theta, n, config, rng=None):
    """Draw one permutation from the transposition Gibbs chain."""
    if config.method != GIBBS:
        raise ValueError('gibbs_sample requires method "gibbs", got "{}"'.format(config.method))
    return Permutation(gibbs_sample_batch(spec, theta, n, config, 1, rng)[0])


def _greedy_assignment(thresholds, rng):
    # Rank l goes to an index chosen uniformly among the unused ones with threshold <= l.
    size, n = thresholds.shape
    rows = np.arange(size)
    unused = np.ones((size, n), dtype=bool)
    images = np.zeros((size, n), dtype=np.int64)
    for rank in range(1, n + 1):
        eligible = unused & (thresholds <= rank)
        counts = eligible.sum(axis=1)
        if np.any(counts == 0):
            raise RuntimeError('No eligible index at rank {}; the auxiliary variables are inconsistent '
                               'with the current permutation.'.format(rank))
        picks = np.minimum(np.floor(rng.random(size) * counts).astype(np.int64), counts - 1)
        chosen = np.argmax(np.cumsum(eligible, axis=1) > picks[:, None], axis=1)
        images[rows, chosen] = rank
        unused[rows, chosen] = False
    return images


def hit_and_run_batch(theta, n, config, size, rng=None):
    """Run `size` independent auxiliary-variable chains for the rank correlation model `f(x, y) = xy`.

    One sweep draws `U_j` uniform on `[0, exp(theta j pi(j) / n^2)]`, sets
    `b_j = max((n^2 / (theta j)) log U_j, 1)` and reassigns the ranks `1, ..., n` greedily, rank `l`
    going to an unused index with `b_j <= l` chosen uniformly. Writing `U_j = V_j exp(theta j pi(j) / n^2)`
    with `V_j` uniform on `(0, 1]` gives `b_j = pi(j) + (n^2 / (theta j)) log V_j <= pi(j)` exactly in
    floating point, so the previous owner of a rank stays eligible.

    # Returns
        1-indexed images of shape `(size, n)`.
    """
    theta = float(np.asarray(theta, dtype=np.float64).reshape(-1)[0]) if np.ndim(theta) else float(theta)
    if not np.isfinite(theta) or theta < 0.:
        raise ValueError('The hit-and-run sampler needs a finite theta >= 0, got {}.'.format(theta))
    rng = make_rng(config.seed if rng is None else rng)
    images = uniform_permutations(n, size, rng)
    if theta == 0.:
        return images

    scale = float(n) * n / (theta * np.arange(1, n + 1, dtype=np.float64))
    for _ in range(config.sweeps):
        log_v = np.log1p(-rng.random((size, n)))
        thresholds = np.maximum(images + scale[None, :] * log_v, 1.)
        images = _greedy_assignment(thresholds, rng)
    return images


def hit_and_run_sample(theta, n, config, rng=None):
    """Draw one permutation from the auxiliary-variable sampler (`f = xy`, `theta >= 0`)."""
    if config.method != HIT_AND_RUN:
        raise ValueError('hit_and_run_sample requires method "hit_and_run", got "{}"'.format(config.method))
    return Permutation(hit_and_run_batch(theta, n, config, 1, rng)[0])


def is_rank_correlation(spec):
    """True if `spec` is `xy`, possibly doubly centered (both define the same model)."""
    if spec.dimension != 1:
        return False
    component = spec.components[0]
    if isinstance(component, CenteredComponent):
        component = component.base
    return isinstance(component, ProductComponent)


def resolve_method(spec, theta, method='auto'):
    """Resolve `auto`: exact uniform draws at the origin, the auxiliary-variable sampler where it
    applies, Gibbs otherwise."""
    method = METHOD_ALIASES.get(method, method)
    if method != 'auto':
        return method
    theta = as_theta(theta, spec)
    if not np.any(theta):
        return UNIFORM
    if is_rank_correlation(spec) and theta[0] >= 0.:
        return HIT_AND_RUN
    return GIBBS


class Sampler(object):
    """Abstract base class for all implemented samplers.

    A sampler draws (approximately) from `P_{n, theta}` for a fixed statistic and parameter.
    To implement your own sampler, you have to implement the following methods:

    - `sample_batch`

    # Arguments
        config (`SamplerConfig` instance): Sweeps and seed.
    """
    def __init__(self, config):
        self.config = config

    def sample_batch(self, n, size, rng=None):
        raise NotImplementedError()

    def sample(self, n, rng=None):
        """Return a single `Permutation` of size `n`."""
        return Permutation(self.sample_batch(n, 1, rng)[0])

    def get_config(self):
        return self.config.get_config()


class UniformSampler(Sampler):
    def sample_batch(self, n, size, rng=None):
        return uniform_permutations(n, size, make_rng(self.config.seed if rng is None else rng))


class GibbsSampler(Sampler):
    def __init__(self, spec, theta, config):
        super(GibbsSampler, self).__init__(config)
        self.spec = spec
        self.theta = as_theta(theta, spec)

    def sample_batch(self, n, size, rng=None):
        return gibbs_sample_batch(self.spec, self.theta, n, self.config, size, rng)

    def get_config(self):
        config = super(GibbsSampler, self).get_config()
        config['theta'] = self.theta.tolist()
        return config


class HitAndRunSampler(Sampler):
    def __init__(self, theta, config):
        super(HitAndRunSampler, self).__init__(config)
        self.theta = float(as_theta(theta, 1)[0])
        if self.theta < 0.:
            raise ValueError('The hit-and-run sampler is only valid for theta >= 0, got {}; '
                             'use the Gibbs sampler instead.'.format(self.theta))

    def sample_batch(self, n, size, rng=None):
        return hit_and_run_batch(self.theta, n, self.config, size, rng)

    def get_config(self):
        config = super(HitAndRunSampler, self).get_config()
        config['theta'] = self.theta
        return config


def get_sampler(spec, theta, config):
    """Build the sampler named by `config.method` after checking it applies to `spec` and `theta`."""
    if config.method == UNIFORM:
        return UniformSampler(config)
    if config.method == GIBBS:
        return GibbsSampler(spec, theta, config)
    if not is_rank_correlation(spec):
        raise ValueError('The hit-and-run sampler only applies to the one-dimensional statistic xy, got {}.'.format(spec))
    return HitAndRunSampler(theta, config)
