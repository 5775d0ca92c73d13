from __future__ import division
from __future__ import print_function
import argparse
import json
import sys

import numpy as np

from permexp.callbacks import FileLogger, ReplicationLogger, WandbLogger
from permexp.common.misc_util import make_rng
from permexp.core import (StatisticSpec, as_theta, center_components, read_permutation, read_tabulated_spec,
                          sufficient_statistic, write_permutations)
from permexp.errors import NumericalError
from permexp.estimators import (approx_mle_origin, confidence_interval, grad_Z0, hoeffding_variance,
                                raw_gamma_matrix, solve_ple)
from permexp.experiments import EXPERIMENTS, ExperimentConfig, format_cell, run_experiment
from permexp.limiting import (DEFAULT_GRID, asymptotic_matrices, gamma_matrix, limiting_log_partition,
                              limiting_z_vector, sinkhorn_density)
from permexp.oracle import ExactModel
from permexp.samplers import SamplerConfig, get_sampler, resolve_method
from permexp.util import inverse_psd, symmetrize


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _to_native(value):
    if isinstance(value, dict):
        return dict((str(k), _to_native(v)) for k, v in value.items())
    if isinstance(value, (list, tuple)):
        return [_to_native(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def _flatten(prefix, value, rows):
    if isinstance(value, dict):
        for key in sorted(value):
            _flatten('{}.{}'.format(prefix, key) if prefix else str(key), value[key], rows)
    elif isinstance(value, list) and value and isinstance(value[0], list):
        for index, item in enumerate(value):
            _flatten('{}[{}]'.format(prefix, index), item, rows)
    elif isinstance(value, list):
        rows.append((prefix, ' '.join(repr(v) for v in value)))
    else:
        rows.append((prefix, repr(value) if isinstance(value, float) else str(value)))


def emit(payload, args):
    """Write `payload` as JSON (default) or as `key,value` CSV lines to `--out` or stdout."""
    payload = _to_native(payload)
    if args.format == 'csv':
        rows = []
        _flatten('', payload, rows)
        text = 'key,value\n' + ''.join('{},{}\n'.format(k, v) for k, v in rows)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + '\n'
    if args.out:
        with open(args.out, 'w') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def build_spec(args):
    spec = read_tabulated_spec(args.stat_file) if args.stat_file else StatisticSpec.parse(args.stat)
    return center_components(spec) if args.centered else spec


def _seed(args):
    return 0 if args.seed is None else args.seed


def cmd_sample(args):
    spec = build_spec(args)
    theta = as_theta(args.theta, spec)
    config = SamplerConfig(method=resolve_method(spec, theta, args.method), sweeps=args.sweeps,
                           proposals_per_sweep=args.proposals, seed=_seed(args))
    sampler = get_sampler(spec, theta, config)
    permutations = [sampler.sample(args.n, make_rng(config.seed, args.n, r)) for r in range(args.reps)]
    if args.out:
        write_permutations(args.out, permutations)
    else:
        for permutation in permutations:
            sys.stdout.write(permutation.to_line() + '\n')


def _report_payload(report):
    return {
        'root': report.root,
        'iterations': report.iterations,
        'gradient_norm': report.gradient_norm,
        'converged': report.converged,
        'condition_number': report.condition_number,
        'method': report.method,
    }


def cmd_ple(args):
    spec = build_spec(args)
    permutation = read_permutation(args.perm)
    report = solve_ple(spec, permutation, theta_init=args.theta_init, tol=args.tol)
    emit(_report_payload(report), args)


def cmd_ci(args):
    spec = build_spec(args)
    permutation = read_permutation(args.perm)
    d = args.d if args.d is not None else np.eye(spec.dimension)[0]
    interval = confidence_interval(spec, permutation, d, alpha=args.alpha, tol=args.tol)
    emit({
        'theta_hat': interval.report.root,
        'estimate': interval.estimate,
        'lo': interval.lo,
        'hi': interval.hi,
        'alpha': args.alpha,
        'sandwich': interval.sandwich.sandwich,
        'sigma_hat': interval.sandwich.sigma_hat,
        'a_hat': interval.sandwich.a_hat,
        'report': _report_payload(interval.report),
    }, args)


def cmd_mle0(args):
    spec = build_spec(args)
    permutation = read_permutation(args.perm)
    n = permutation.n
    theta = approx_mle_origin(spec, permutation, raw_gamma=args.raw_gamma)
    gamma = raw_gamma_matrix(spec) if args.raw_gamma else hoeffding_variance(spec, n) / n
    emit({
        'theta': theta,
        'statistic': sufficient_statistic(spec, permutation),
        'grad_Z0': grad_Z0(spec, n),
        'gamma': gamma,
        'raw_gamma': args.raw_gamma,
    }, args)


def cmd_limiting(args):
    spec = build_spec(args)
    theta = as_theta(args.theta, spec)
    grid = sinkhorn_density(spec, theta, m=args.grid, tol=args.tol, verbose=args.verbose)
    sigma, a = asymptotic_matrices(grid, spec, theta)
    centered = spec if spec.centered_flag else center_components(spec)
    a_inv = inverse_psd(a, name='A(theta)')
    emit({
        'Z': limiting_log_partition(grid, spec, theta),
        'z': limiting_z_vector(grid, spec),
        'Sigma': sigma,
        'A': a,
        'sandwich': symmetrize(a_inv.dot(sigma).dot(a_inv)),
        'Gamma': gamma_matrix(centered, args.grid),
        'marginal_error': grid.marginal_error,
        'iterations': grid.iterations,
    }, args)


def cmd_oracle(args):
    spec = build_spec(args)
    model = ExactModel(spec, args.theta, args.n)
    emit({
        'log_Z': model.log_Z,
        'mean': model.mean_statistic(),
        'covariance': model.covariance_statistic(),
        'pair_marginals': model.pair_marginals(),
    }, args)


def cmd_experiment(args):
    if args.config:
        config = ExperimentConfig.from_file(args.config)
        if args.name is not None and args.name != config.experiment:
            raise ValueError('The configuration file describes {}, not {}.'.format(config.experiment, args.name))
    else:
        if args.name is None:
            raise ValueError('Name an experiment ({}) or pass --config.'.format(', '.join(EXPERIMENTS)))
        config = ExperimentConfig(experiment=args.name)
    if args.full_scale:
        config = config.full_scale()
    config = config.with_overrides(
        n_values=args.n, replications=args.reps, theta0=args.theta0, method=args.method, sweeps=args.sweeps,
        proposals=args.proposals, seed=args.seed, alpha=args.alpha, d=args.d, grid=args.grid,
        workers=args.threads, output=args.out, tol=args.tol, stat=args.stat, stat_file=args.stat_file,
        centered=True if args.centered else None)

    callbacks = []
    if args.verbose > 0:
        callbacks.append(ReplicationLogger(interval=args.log_interval))
    if args.log_json:
        callbacks.append(FileLogger(args.log_json))
    if args.wandb:
        callbacks.append(WandbLogger(project=args.wandb))
    result = run_experiment(config, callbacks=callbacks)
    if not config.output:
        sys.stdout.write(','.join(result.header) + '\n')
        for row in result.rows:
            sys.stdout.write(','.join(format_cell(v) for v in row) + '\n')


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Root seed (default 0).')
    common.add_argument('--threads', type=int, default=None, help='Worker processes for experiments.')
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument('--json', dest='format', action='store_const', const='json', help='JSON output (default).')
    fmt.add_argument('--csv', dest='format', action='store_const', const='csv', help='key,value CSV output.')
    common.set_defaults(format='json')
    common.add_argument('--out', default=None, help='Output path; stdout when omitted.')
    common.add_argument('--stat', default=None, help='Comma separated built-in statistics (default xy).')
    common.add_argument('--stat-file', default=None, help='Tabulated statistic file.')
    common.add_argument('--centered', action='store_true', help='Center the statistic components first.')
    common.add_argument('--verbose', type=int, default=0)
    return common


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='permexp', description='Simulation and inference for exponential '
                                     'families on permutations.')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    sample = subparsers.add_parser('sample', parents=[common], help='Draw permutations.')
    sample.add_argument('--theta', required=True)
    sample.add_argument('--n', type=int, required=True)
    sample.add_argument('--method', default='auto', choices=['auto', 'gibbs', 'har', 'hit_and_run', 'uniform'])
    sample.add_argument('--sweeps', type=int, default=10)
    sample.add_argument('--proposals', type=int, default=None)
    sample.add_argument('--reps', type=int, default=1)
    sample.set_defaults(func=cmd_sample)

    ple = subparsers.add_parser('ple', parents=[common], help='Pseudo-likelihood estimate.')
    ple.add_argument('--perm', required=True)
    ple.add_argument('--theta-init', default=None)
    ple.add_argument('--tol', type=float, default=1e-10)
    ple.set_defaults(func=cmd_ple)

    ci = subparsers.add_parser('ci', parents=[common], help='Sandwich confidence interval for d^T theta.')
    ci.add_argument('--perm', required=True)
    ci.add_argument('--d', default=None)
    ci.add_argument('--alpha', type=float, default=.05)
    ci.add_argument('--tol', type=float, default=1e-10)
    ci.set_defaults(func=cmd_ci)

    mle0 = subparsers.add_parser('mle0', parents=[common], help='MLE linearized at the origin.')
    mle0.add_argument('--perm', required=True)
    mle0.add_argument('--paper-gamma', '--raw-gamma', dest='raw_gamma', action='store_true',
                      help='Use the raw second moments int f f^T.')
    mle0.set_defaults(func=cmd_mle0)

    limiting = subparsers.add_parser('limiting', parents=[common], help='Limiting measure and covariances.')
    limiting.add_argument('--theta', required=True)
    limiting.add_argument('--grid', type=int, default=DEFAULT_GRID)
    limiting.add_argument('--tol', type=float, default=1e-10)
    limiting.set_defaults(func=cmd_limiting)

    oracle = subparsers.add_parser('oracle', parents=[common], help='Exact enumeration for n <= 8.')
    oracle.add_argument('--theta', required=True)
    oracle.add_argument('--n', type=int, required=True)
    oracle.set_defaults(func=cmd_oracle)

    experiment = subparsers.add_parser('experiment', parents=[common], help='Monte Carlo studies.')
    experiment.add_argument('name', nargs='?', choices=EXPERIMENTS, default=None)
    experiment.add_argument('--config', default=None, help='key=value configuration file.')
    experiment.add_argument('--paper-scale', '--full-scale', dest='full_scale', action='store_true',
                            help='Published sizes and replications.')
    experiment.add_argument('--n', default=None, help='Comma separated permutation sizes.')
    experiment.add_argument('--reps', type=int, default=None)
    experiment.add_argument('--theta0', default=None)
    experiment.add_argument('--method', default=None, choices=['auto', 'gibbs', 'har', 'hit_and_run', 'uniform'])
    experiment.add_argument('--sweeps', type=int, default=None)
    experiment.add_argument('--proposals', type=int, default=None)
    experiment.add_argument('--alpha', type=float, default=None)
    experiment.add_argument('--d', default=None)
    experiment.add_argument('--grid', type=int, default=None)
    experiment.add_argument('--tol', type=float, default=None)
    experiment.add_argument('--log-interval', type=int, default=100)
    experiment.add_argument('--log-json', default=None, help='Dump per-replication results as JSON.')
    experiment.add_argument('--wandb', default=None, metavar='PROJECT', help='Log to Weights & Biases.')
    experiment.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    if args.command != 'experiment' and args.stat is None:
        args.stat = 'xy'
    try:
        args.func(args)
    except NumericalError as e:
        print('permexp: numerical failure: {}'.format(e), file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, IOError) as e:
        print('permexp: error: {}'.format(e), file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
