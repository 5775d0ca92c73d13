from __future__ import division
import json
import math

import pytest
import numpy as np
from numpy.testing import assert_allclose

from permexp.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, build_parser, main
from permexp.core import Permutation, StatisticSpec, read_permutations, write_permutations, write_tabulated_spec
from permexp.experiments import ExperimentConfig


def _write_perm(tmpdir, images, name='perm.txt'):
    path = str(tmpdir.join(name))
    write_permutations(path, [Permutation(images)])
    return path


def _json_output(capsys):
    return json.loads(capsys.readouterr().out)


def test_oracle(capsys):
    assert main(['oracle', '--theta', '1', '--n', '3']) == EXIT_OK
    payload = _json_output(capsys)
    assert np.array(payload['pair_marginals']).shape == (3, 3, 3, 3)
    assert len(payload['mean']) == 1

    assert main(['oracle', '--theta', '0', '--n', '3', '--csv']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'key,value'
    values = dict(line.split(',', 1) for line in lines[1:])
    assert_allclose(float(values['log_Z']), math.log(6.))
    assert len(values['pair_marginals[0][1][2]'].split()) == 3


def test_oracle_rejects_large_n(capsys):
    assert main(['oracle', '--theta', '1', '--n', '9']) == EXIT_USAGE
    assert 'error' in capsys.readouterr().err


def test_sample(capsys, tmpdir):
    args = ['sample', '--theta', '2', '--n', '10', '--reps', '3', '--seed', '4']
    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    for line in lines:
        assert sorted(int(v) for v in line.split()) == list(range(1, 11))
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == lines

    path = str(tmpdir.join('samples.txt'))
    assert main(args + ['--out', path]) == EXIT_OK
    assert [p.to_line() for p in read_permutations(path)] == lines

    assert main(['sample', '--theta', '-1', '--n', '6', '--stat', 'neg_abs_diff', '--method', 'gibbs',
                 '--sweeps', '2']) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 1
    assert main(['sample', '--theta', '1', '--n', '6', '--stat', 'neg_abs_diff', '--method', 'har']) == EXIT_USAGE


def test_ple(capsys, tmpdir):
    path = _write_perm(tmpdir, [3, 1, 4, 7, 5, 2, 6])
    assert main(['ple', '--perm', path]) == EXIT_OK
    payload = _json_output(capsys)
    assert payload['converged'] is True
    assert payload['gradient_norm'] <= 1e-10
    root = payload['root']

    table = str(tmpdir.join('xy.txt'))
    write_tabulated_spec(table, StatisticSpec('xy'), 16)
    assert main(['ple', '--perm', path, '--stat-file', table]) == EXIT_OK
    assert_allclose(_json_output(capsys)['root'], root, atol=1e-8)

    assert main(['ple', '--perm', path, '--centered', '--theta-init', '0.5']) == EXIT_OK
    assert_allclose(_json_output(capsys)['root'], root, atol=1e-8)


def test_ple_failures(capsys, tmpdir):
    identity = _write_perm(tmpdir, [1, 2, 3, 4, 5], name='identity.txt')
    assert main(['ple', '--perm', identity]) == EXIT_NUMERICAL
    assert 'numerical failure' in capsys.readouterr().err
    assert main(['ple', '--perm', str(tmpdir.join('missing.txt'))]) == EXIT_USAGE
    assert main(['ple', '--perm', identity, '--stat', 'spearman']) == EXIT_USAGE


def test_usage_errors(capsys):
    assert main(['frobnicate']) == EXIT_USAGE
    assert main(['ple']) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(['limiting', '--theta', '1,2', '--grid', '16']) == EXIT_USAGE
    assert main(['oracle', '--theta', '1', '--n', '3', '--json', '--csv']) == EXIT_USAGE


def test_ci(capsys, tmpdir):
    path = _write_perm(tmpdir, [5, 11, 2, 8, 1, 12, 7, 3, 10, 4, 9, 6])
    assert main(['ci', '--perm', path, '--alpha', '0.1']) == EXIT_OK
    payload = _json_output(capsys)
    assert payload['lo'] < payload['estimate'] < payload['hi']
    assert payload['alpha'] == .1
    assert_allclose(payload['estimate'], payload['theta_hat'][0])

    assert main(['ci', '--perm', path, '--stat', 'xy,neg_abs_diff', '--d', '1,1']) == EXIT_OK
    payload = _json_output(capsys)
    assert np.array(payload['sandwich']).shape == (2, 2)
    assert_allclose(payload['estimate'], sum(payload['theta_hat']))


def test_mle0(capsys, tmpdir):
    path = _write_perm(tmpdir, [3, 1, 4, 2])
    assert main(['mle0', '--perm', path]) == EXIT_OK
    payload = _json_output(capsys)
    assert_allclose(payload['theta'], [0.], atol=1e-12)
    assert_allclose(payload['grad_Z0'], [1.5625])
    assert payload['raw_gamma'] is False

    for flag in ['--paper-gamma', '--raw-gamma']:
        assert main(['mle0', '--perm', path, flag]) == EXIT_OK
        payload = _json_output(capsys)
        assert payload['raw_gamma'] is True
        assert_allclose(payload['gamma'], [[1. / 9.]], rtol=1e-5)


def test_scale_flags():
    parser = build_parser()
    for flag in ['--paper-scale', '--full-scale']:
        assert parser.parse_args(['experiment', 'ple_histogram', flag]).full_scale is True
    assert parser.parse_args(['experiment', 'ple_histogram']).full_scale is False


def test_limiting(capsys, tmpdir):
    out = str(tmpdir.join('limiting.json'))
    assert main(['limiting', '--theta', '0', '--grid', '16', '--centered', '--out', out]) == EXIT_OK
    assert capsys.readouterr().out == ''
    with open(out, 'r') as f:
        payload = json.load(f)
    for key in ['Z', 'z', 'Sigma', 'A', 'sandwich', 'Gamma', 'marginal_error', 'iterations']:
        assert key in payload
    assert_allclose(payload['Z'], 0., atol=1e-12)
    assert_allclose(payload['sandwich'], np.linalg.inv(payload['Gamma']), rtol=1e-3)


def test_experiment(capsys, tmpdir):
    args = ['experiment', 'ple_histogram', '--n', '20', '--reps', '3', '--grid', '16', '--sweeps', '3']
    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'n,replication,theta_hat,converged'
    assert len(lines) == 4

    config_path = str(tmpdir.join('config.txt'))
    ExperimentConfig('ci_coverage', n_values=[40], replications=2, sweeps=3, grid=16).to_file(config_path)
    out = str(tmpdir.join('ci.csv'))
    log = str(tmpdir.join('log.json'))
    assert main(['experiment', '--config', config_path, '--reps', '3', '--out', out, '--log-json', log,
                 '--verbose', '1']) == EXIT_OK
    assert 'replications at n = 40' in capsys.readouterr().out
    with open(out, 'r') as f:
        assert len(f.read().splitlines()) == 4
    with open(log, 'r') as f:
        assert json.load(f)['replication'] == [0, 1, 2]

    assert main(['experiment', 'ple_histogram', '--config', config_path]) == EXIT_USAGE
    assert main(['experiment']) == EXIT_USAGE
    assert main(['experiment', 'ci_coverage', '--n', '100,200']) == EXIT_USAGE


if __name__ == '__main__':
    pytest.main([__file__])
