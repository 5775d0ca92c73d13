from __future__ import division
from __future__ import print_function
from collections import namedtuple
import csv
import json
import os
import warnings

import numpy as np

from permexp.callbacks import CallbackList
from permexp.common.cmd_util import make_replication_pool
from permexp.common.misc_util import make_rng
from permexp.core import StatisticSpec, as_theta, center_components, read_tabulated_spec
from permexp.errors import ExperimentAbortedError, NumericalError
from permexp.estimators import approx_mle_origin, confidence_interval, solve_ple
from permexp.limiting import asymptotic_ple_cov, gamma_matrix, sinkhorn_density
from permexp.samplers import SamplerConfig, get_sampler, resolve_method
from permexp.util import inverse_psd


PLE_HISTOGRAM = 'ple_histogram'
MLE_VS_PLE_ORIGIN = 'mle_vs_ple_origin'
CI_COVERAGE = 'ci_coverage'
EXPERIMENTS = (PLE_HISTOGRAM, MLE_VS_PLE_ORIGIN, CI_COVERAGE)
# Largest accepted share of failed replications per permutation size.
MAX_FAILURE_RATE = .01

# (theta0, desk n values, desk replications, published n values, published replications)
_SCALES = {
    PLE_HISTOGRAM: ([2.], [500, 2000], 400, [500, 2000, 8000], 2000),
    MLE_VS_PLE_ORIGIN: ([0.], [1000, 2000], 400, [1000, 2000, 4000, 8000], 2000),
    CI_COVERAGE: ([2.], [1000], 100, [1000], 100),
}


def _as_bool(value):
    if isinstance(value, str):
        if value.strip().lower() in ('1', 'true', 'yes', 'on'):
            return True
        if value.strip().lower() in ('0', 'false', 'no', 'off', ''):
            return False
        raise ValueError('Cannot interpret "{}" as a boolean.'.format(value))
    return bool(value)


def _as_float_list(value):
    if isinstance(value, str):
        return [float(v) for v in value.split(',') if v.strip()]
    return [float(v) for v in np.atleast_1d(value)]


def _as_int_list(value):
    if isinstance(value, str):
        return [int(v) for v in value.split(',') if v.strip()]
    return [int(v) for v in np.atleast_1d(value)]


def _optional(convert):
    def wrapped(value):
        if value is None or (isinstance(value, str) and value.strip() in ('', 'none', 'None')):
            return None
        return convert(value)
    return wrapped


def _format(value):
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ','.join(_format(v) for v in value)
    return str(value)


# Schema of the key=value config format, in serialization order.
CONFIG_FIELDS = (
    ('experiment', str),
    ('stat', str),
    ('stat_file', str),
    ('centered', _as_bool),
    ('theta0', _as_float_list),
    ('n_values', _as_int_list),
    ('replications', int),
    ('method', str),
    ('sweeps', int),
    ('proposals', _optional(int)),
    ('seed', int),
    ('alpha', float),
    ('d', _optional(_as_float_list)),
    ('tol', float),
    ('grid', int),
    ('workers', int),
    ('output', str),
)


class ExperimentConfig(object):
    """Settings of one Monte Carlo study.

    Serialized as flat `key=value` text, one pair per line, `#` starting a comment and lists comma
    separated. Defaults are the desk-scale sizes of each experiment; `full_scale()` restores the
    published ones.

    # Arguments
        experiment (str): `ple_histogram`, `mle_vs_ple_origin` or `ci_coverage`.
        stat (str): Comma separated built-in statistic names.
        stat_file (str): Tabulated statistic file, used instead of `stat` when set.
        centered (bool): Center the statistic before use.
        theta0 (list): True parameter.
        n_values (list): Permutation sizes.
        replications (int): Replications per size.
        method (str): Sampler, `auto` picks hit-and-run where it applies and Gibbs otherwise.
        sweeps (int): Sampler sweeps.
        proposals (int): Gibbs proposals per sweep, `n^2` when unset.
        seed (int): Root seed; replication `r` at size `n` uses the stream `(seed, n, r)`.
        alpha (float): Confidence level parameter of `ci_coverage`.
        d (list): Contrast of `ci_coverage`, the first basis vector when unset.
        tol (float): PLE tolerance.
        grid (int): Resolution of the limiting-measure quadratures for the sidecar.
        workers (int): Worker processes.
        output (str): CSV path, empty for no file.
    """
    def __init__(self, experiment=PLE_HISTOGRAM, stat='xy', stat_file='', centered=False, theta0=None,
                 n_values=None, replications=None, method='auto', sweeps=10, proposals=None, seed=0,
                 alpha=.05, d=None, tol=1e-10, grid=128, workers=1, output=''):
        if experiment not in EXPERIMENTS:
            raise ValueError('Unknown experiment "{}", choose from {}.'.format(experiment, EXPERIMENTS))
        theta_default, n_default, reps_default, _, _ = _SCALES[experiment]
        self.experiment = experiment
        self.stat = stat
        self.stat_file = stat_file or ''
        self.centered = _as_bool(centered)
        self.theta0 = _as_float_list(theta_default if theta0 is None else theta0)
        self.n_values = _as_int_list(n_default if n_values is None else n_values)
        self.replications = int(reps_default if replications is None else replications)
        self.method = method
        self.sweeps = int(sweeps)
        self.proposals = None if proposals is None else int(proposals)
        self.seed = int(seed)
        self.alpha = float(alpha)
        self.d = None if d is None else _as_float_list(d)
        self.tol = float(tol)
        self.grid = int(grid)
        self.workers = int(workers)
        self.output = output or ''
        self.validate()

    def validate(self):
        if self.replications < 1:
            raise ValueError('replications must be >= 1, is {}'.format(self.replications))
        if not self.n_values or any(n < 2 for n in self.n_values):
            raise ValueError('All permutation sizes must be >= 2, got {}'.format(self.n_values))
        if self.experiment == CI_COVERAGE and len(self.n_values) != 1:
            raise ValueError('ci_coverage runs at a single permutation size, got {}'.format(self.n_values))
        if not 0. < self.alpha < 1.:
            raise ValueError('alpha must lie in (0, 1), is {}'.format(self.alpha))
        if self.workers < 1:
            raise ValueError('workers must be >= 1, is {}'.format(self.workers))
        # Raises on unknown methods and invalid sweep settings.
        SamplerConfig(method='gibbs' if self.method == 'auto' else self.method, sweeps=self.sweeps,
                      proposals_per_sweep=self.proposals, seed=self.seed)

    def get_config(self):
        return dict((name, getattr(self, name)) for name, _ in CONFIG_FIELDS)

    def serialize(self):
        lines = ['# permexp experiment configuration']
        for name, _ in CONFIG_FIELDS:
            lines.append('{}={}'.format(name, _format(getattr(self, name))))
        return '\n'.join(lines) + '\n'

    @classmethod
    def parse(cls, text):
        converters = dict(CONFIG_FIELDS)
        values = {}
        for number, line in enumerate(text.splitlines(), 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValueError('Line {} is not of the form key=value: {!r}'.format(number, line))
            key, value = [part.strip() for part in line.split('=', 1)]
            if key not in converters:
                raise ValueError('Unknown configuration key "{}" on line {}.'.format(key, number))
            values[key] = converters[key](value)
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        with open(path, 'r') as f:
            return cls.parse(f.read())

    def to_file(self, path):
        with open(path, 'w') as f:
            f.write(self.serialize())

    def with_overrides(self, **overrides):
        """Return a copy with every override that is not `None` applied."""
        values = self.get_config()
        values.update((key, value) for key, value in overrides.items() if value is not None)
        return ExperimentConfig(**values)

    def full_scale(self):
        """Return a copy with the published permutation sizes and replication counts."""
        _, _, _, n_full, reps_full = _SCALES[self.experiment]
        return self.with_overrides(n_values=n_full, replications=reps_full)

    def build_spec(self):
        spec = read_tabulated_spec(self.stat_file) if self.stat_file else StatisticSpec.parse(self.stat)
        return center_components(spec) if self.centered else spec

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.get_config() == other.get_config()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return 'ExperimentConfig({})'.format(', '.join('{}={!r}'.format(k, v) for k, v in
                                                       sorted(self.get_config().items())))


ExperimentResult = namedtuple('ExperimentResult', 'header, rows, sidecar, nb_failed')


class ReplicationTask(object):
    """One replication of an experiment: draw a permutation at `theta0` and estimate from it.

    Instances are shipped to worker processes; a replication only depends on `(seed, n, r)`.
    """
    def __init__(self, config):
        self.config = config
        self.spec = config.build_spec()
        self.theta0 = as_theta(config.theta0, self.spec)
        self.sampler_config = SamplerConfig(method=resolve_method(self.spec, self.theta0, config.method),
                                            sweeps=config.sweeps, proposals_per_sweep=config.proposals,
                                            seed=config.seed)
        self.sampler = get_sampler(self.spec, self.theta0, self.sampler_config)
        self.d = np.eye(self.spec.dimension)[0] if config.d is None else as_theta(config.d, self.spec)

    def sample(self, n, replication):
        rng = make_rng(self.config.seed, n, replication)
        return self.sampler.sample(n, rng)

    def __call__(self, task):
        n, replication = task
        permutation = self.sample(n, replication)
        try:
            metrics = self.estimate(permutation)
        except NumericalError as e:
            return replication, self.failure_metrics(), True, str(e)
        return replication, metrics, not metrics.pop('converged', True), None

    def estimate(self, permutation):
        raise NotImplementedError()

    def failure_metrics(self):
        raise NotImplementedError()

    def rows(self, n, replication, metrics, failed):
        raise NotImplementedError()


def _theta_keys(dimension):
    if dimension == 1:
        return ['theta_hat']
    return ['theta_hat_{}'.format(r + 1) for r in range(dimension)]


class PLEHistogramTask(ReplicationTask):
    def __init__(self, config):
        super(PLEHistogramTask, self).__init__(config)
        self.keys = _theta_keys(self.spec.dimension)
        self.header = ['n', 'replication'] + self.keys + ['converged']

    def estimate(self, permutation):
        report = solve_ple(self.spec, permutation, tol=self.config.tol)
        metrics = dict(zip(self.keys, report.root.tolist()))
        metrics['converged'] = report.converged
        return metrics

    def failure_metrics(self):
        return dict((key, float('nan')) for key in self.keys)

    def rows(self, n, replication, metrics, failed):
        return [[n, replication] + [metrics[key] for key in self.keys] + [not failed]]


class MLEvsPLETask(ReplicationTask):
    def __init__(self, config):
        super(MLEvsPLETask, self).__init__(config)
        self.header = ['n', 'replication', 'estimator', 'value']
        self.keys = ['mle', 'ple'] if self.spec.dimension == 1 else \
            ['{}_{}'.format(e, r + 1) for e in ('mle', 'ple') for r in range(self.spec.dimension)]

    def estimate(self, permutation):
        with warnings.catch_warnings():
            # The linearization warning is expected in the tails of the null distribution.
            warnings.simplefilter('ignore')
            mle = approx_mle_origin(self.spec, permutation)
        report = solve_ple(self.spec, permutation, tol=self.config.tol)
        values = mle.tolist() + report.root.tolist()
        metrics = dict(zip(self.keys, values))
        metrics['converged'] = report.converged
        return metrics

    def failure_metrics(self):
        return dict((key, float('nan')) for key in self.keys)

    def rows(self, n, replication, metrics, failed):
        return [[n, replication, key, metrics[key]] for key in self.keys]


class CICoverageTask(ReplicationTask):
    def __init__(self, config):
        super(CICoverageTask, self).__init__(config)
        self.header = ['replication', 'lo', 'hi', 'covered']
        self.target = float(self.d.dot(self.theta0))

    def estimate(self, permutation):
        interval = confidence_interval(self.spec, permutation, self.d, alpha=self.config.alpha, tol=self.config.tol)
        return {'lo': interval.lo, 'hi': interval.hi, 'width': interval.hi - interval.lo,
                'covered': float(interval.lo <= self.target <= interval.hi)}

    def failure_metrics(self):
        return {'lo': float('nan'), 'hi': float('nan'), 'width': float('nan'), 'covered': float('nan')}

    def rows(self, n, replication, metrics, failed):
        return [[replication, metrics['lo'], metrics['hi'], bool(metrics['covered'] == 1.)]]


TASKS = {
    PLE_HISTOGRAM: PLEHistogramTask,
    MLE_VS_PLE_ORIGIN: MLEvsPLETask,
    CI_COVERAGE: CICoverageTask,
}


def format_cell(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def sidecar_path(output):
    return os.path.splitext(output)[0] + '.json'


def theoretical_covariance(config, spec):
    """Asymptotic covariance of `sqrt(n) theta_hat`: the sandwich `A^{-1} Sigma A^{-1}` at `theta0`.

    At the origin this equals `Gamma^{-1}`, which is what `mle_vs_ple_origin` reports.
    """
    theta0 = as_theta(config.theta0, spec)
    if config.experiment == MLE_VS_PLE_ORIGIN:
        centered = spec if spec.centered_flag else center_components(spec)
        return inverse_psd(gamma_matrix(centered, config.grid), name='Gamma')
    grid = sinkhorn_density(spec, theta0, m=config.grid)
    return asymptotic_ple_cov(grid, spec, theta0)


def _summarize(values):
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return {'mean': None, 'sd': None, 'count': 0}
    return {'mean': float(np.mean(values)), 'sd': float(np.std(values, ddof=1)) if values.size > 1 else None,
            'count': int(values.size)}


def run_experiment(config, callbacks=None, num_workers=None):
    """Run the study named by `config.experiment`, write its CSV and sidecar when `config.output` is set.

    # Arguments
        config (ExperimentConfig): The study.
        callbacks (list of `Callback`): Progress reporting.
        num_workers (int): Overrides `config.workers`.

    # Returns
        An `ExperimentResult` with the CSV header, rows (in `(n, replication)` order), sidecar dict
        and number of failed replications.

    # Raises
        ExperimentAbortedError: If more than 1% of the replications at some size fail.
    """
    task = TASKS[config.experiment](config)
    callbacks = CallbackList(callbacks)
    callbacks.set_params({'experiment': config.experiment, 'replications': config.replications,
                          'n_values': config.n_values, 'config': config.get_config()})
    workers = config.workers if num_workers is None else num_workers

    rows = []
    summary = {}
    nb_failed = 0
    callbacks.on_experiment_begin()
    with make_replication_pool(task, workers) as pool:
        for n in config.n_values:
            callbacks.on_size_begin(n)
            results = pool.run([(n, r) for r in range(config.replications)])
            collected = {}
            failed_here = 0
            for replication, metrics, failed, message in results:
                if failed:
                    failed_here += 1
                    if message is not None:
                        warnings.warn('Replication {} at n = {} failed: {}'.format(replication, n, message))
                    else:
                        warnings.warn('Replication {} at n = {} did not converge.'.format(replication, n))
                rows.extend(task.rows(n, replication, metrics, failed))
                for key, value in metrics.items():
                    collected.setdefault(key, []).append(value)
                callbacks.on_replication_end(replication, {'n': n, 'replication': replication,
                                                           'metrics': metrics, 'failed': failed})
            nb_failed += failed_here
            summary[str(n)] = dict((key, _summarize(values)) for key, values in sorted(collected.items()))
            summary[str(n)]['failed'] = failed_here
            callbacks.on_size_end(n, {'failed': failed_here})
            if failed_here > MAX_FAILURE_RATE * config.replications:
                if config.output:
                    write_csv(config.output, task.header, rows)
                raise ExperimentAbortedError('{} of {} replications failed at n = {} (more than {:.0%}).'.format(
                    failed_here, config.replications, n, MAX_FAILURE_RATE))
    callbacks.on_experiment_end()

    sidecar = {'config': config.get_config(), 'summary': summary, 'theory': None}
    try:
        covariance = theoretical_covariance(config, task.spec)
        sidecar['theory'] = {
            'asymptotic_cov': covariance.tolist(),
            'asymptotic_sd': dict((str(n), np.sqrt(np.diag(covariance) / n).tolist()) for n in config.n_values),
            'grid': config.grid,
        }
    except NumericalError as e:
        warnings.warn('Theoretical overlay unavailable: {}'.format(e))

    if config.output:
        write_csv(config.output, task.header, rows)
        with open(sidecar_path(config.output), 'w') as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
    return ExperimentResult(header=task.header, rows=rows, sidecar=sidecar, nb_failed=nb_failed)


def _run_named(experiment, config, callbacks, num_workers):
    if config.experiment != experiment:
        raise ValueError('Expected a {} configuration, got {}.'.format(experiment, config.experiment))
    return run_experiment(config, callbacks=callbacks, num_workers=num_workers)


def run_ple_histogram(config, callbacks=None, num_workers=None):
    """Sample at `theta0`, solve the PLE and record `n, replication, theta_hat, converged`."""
    return _run_named(PLE_HISTOGRAM, config, callbacks, num_workers)


def run_mle_vs_ple_origin(config, callbacks=None, num_workers=None):
    """Record the origin MLE surrogate and the PLE per replication as `n, replication, estimator, value`."""
    return _run_named(MLE_VS_PLE_ORIGIN, config, callbacks, num_workers)


def run_ci_coverage(config, callbacks=None, num_workers=None):
    """Record `replication, lo, hi, covered` for the PLE sandwich interval of `d^T theta0`."""
    return _run_named(CI_COVERAGE, config, callbacks, num_workers)
