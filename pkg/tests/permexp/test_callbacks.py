from __future__ import division
import json

import pytest
import numpy as np
from numpy.testing import assert_allclose

from permexp.callbacks import Callback, CallbackList, FileLogger, ReplicationLogger


class RecordingCallback(Callback):
    def __init__(self):
        super(RecordingCallback, self).__init__()
        self.events = []

    def on_experiment_begin(self, logs={}):
        self.events.append('begin')

    def on_size_begin(self, n, logs={}):
        self.events.append(('size', n))

    def on_replication_end(self, replication, logs={}):
        self.events.append(('replication', replication))

    def on_experiment_end(self, logs={}):
        self.events.append('end')


def _replication_logs(n, replication, value, failed=False):
    return {'n': n, 'replication': replication, 'metrics': {'theta_hat': value}, 'failed': failed}


def test_callback_list_dispatches_in_order():
    first, second = RecordingCallback(), RecordingCallback()
    callbacks = CallbackList([first, second])
    callbacks.set_params({'experiment': 'ple_histogram'})
    callbacks.on_experiment_begin()
    callbacks.on_size_begin(10)
    callbacks.on_replication_end(0, _replication_logs(10, 0, 1.))
    callbacks.on_size_end(10)
    callbacks.on_experiment_end()
    expected = ['begin', ('size', 10), ('replication', 0), 'end']
    assert first.events == expected
    assert second.events == expected
    assert first.params == {'experiment': 'ple_histogram'}


def test_replication_logger(capsys):
    logger = ReplicationLogger(interval=2)
    logger.set_params({'experiment': 'ple_histogram', 'replications': 3})
    logger.on_experiment_begin()
    logger.on_size_begin(50)
    for replication, value in enumerate([1., 3., float('nan')]):
        logger.on_replication_end(replication, _replication_logs(50, replication, value, failed=np.isnan(value)))
    logger.on_size_end(50)
    logger.on_experiment_end()
    out = capsys.readouterr().out
    assert 'Running ple_histogram with 3 replications per size' in out
    assert '2 replications at n = 50 (0 failed) - theta_hat: 2.0000 [sd 1.0000]' in out
    assert '3 replications at n = 50 (1 failed)' in out
    assert logger.moments.count == 2


def test_file_logger(tmpdir):
    path = str(tmpdir.join('log.json'))
    logger = FileLogger(path)
    logger.on_replication_end(1, _replication_logs(20, 1, 2.))
    logger.on_replication_end(0, _replication_logs(20, 0, 1.))
    logger.on_replication_end(0, _replication_logs(10, 0, 5.))
    logger.on_experiment_end()
    with open(path, 'r') as f:
        data = json.load(f)
    assert data['n'] == [10, 20, 20]
    assert data['replication'] == [0, 0, 1]
    assert_allclose(data['theta_hat'], [5., 1., 2.])
    assert data['failed'] == [False, False, False]


def test_file_logger_without_data(tmpdir):
    path = tmpdir.join('empty.json')
    FileLogger(str(path)).on_experiment_end()
    assert not path.check()


if __name__ == '__main__':
    pytest.main([__file__])
