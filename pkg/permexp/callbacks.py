from __future__ import division
from __future__ import print_function
import warnings
import timeit
import json

import numpy as np

from permexp.util import RunningMoments


class Callback(object):
    """Base class for experiment callbacks.

    Experiments call the hooks below with a `logs` dict. `on_replication_end` receives
    `logs['n']`, `logs['replication']`, `logs['metrics']` (dict of scalar results, NaN for a failed
    replication) and `logs['failed']`.
    """
    def __init__(self):
        self.params = {}

    def set_params(self, params):
        self.params = params

    def on_experiment_begin(self, logs={}):
        """Called at beginning of the experiment"""
        pass

    def on_experiment_end(self, logs={}):
        """Called at end of the experiment"""
        pass

    def on_size_begin(self, n, logs={}):
        """Called before the replications at permutation size `n`"""
        pass

    def on_size_end(self, n, logs={}):
        """Called after the replications at permutation size `n`"""
        pass

    def on_replication_end(self, replication, logs={}):
        """Called once per finished replication, in replication order"""
        pass


class CallbackList(Callback):
    def __init__(self, callbacks=None):
        super(CallbackList, self).__init__()
        self.callbacks = list(callbacks or [])

    def set_params(self, params):
        for callback in self.callbacks:
            callback.set_params(params)

    def on_experiment_begin(self, logs={}):
        for callback in self.callbacks:
            callback.on_experiment_begin(logs=logs)

    def on_experiment_end(self, logs={}):
        for callback in self.callbacks:
            callback.on_experiment_end(logs=logs)

    def on_size_begin(self, n, logs={}):
        for callback in self.callbacks:
            callback.on_size_begin(n, logs=logs)

    def on_size_end(self, n, logs={}):
        for callback in self.callbacks:
            callback.on_size_end(n, logs=logs)

    def on_replication_end(self, replication, logs={}):
        for callback in self.callbacks:
            callback.on_replication_end(replication, logs=logs)


class ReplicationLogger(Callback):
    """Print running means and standard deviations every `interval` replications."""
    def __init__(self, interval=100):
        super(ReplicationLogger, self).__init__()
        self.interval = interval
        self.reset()

    def reset(self):
        self.moments = None
        self.metrics_names = None
        self.nb_failed = 0
        self.count = 0

    def on_experiment_begin(self, logs={}):
        self.experiment_start = timeit.default_timer()
        print('Running {} with {} replications per size ...'.format(
            self.params.get('experiment', 'experiment'), self.params.get('replications', '?')))

    def on_experiment_end(self, logs={}):
        duration = timeit.default_timer() - self.experiment_start
        print('done, took {:.3f} seconds'.format(duration))

    def on_size_begin(self, n, logs={}):
        self.reset()
        self.size_start = timeit.default_timer()
        print('n = {}'.format(n))

    def on_size_end(self, n, logs={}):
        self.print_summary(n)
        print('n = {} took {:.3f} seconds'.format(n, timeit.default_timer() - self.size_start))

    def on_replication_end(self, replication, logs={}):
        metrics = logs['metrics']
        if self.metrics_names is None:
            self.metrics_names = sorted(metrics.keys())
            self.moments = RunningMoments(shape=(len(self.metrics_names),))
        self.moments.update(np.array([metrics[name] for name in self.metrics_names], dtype=np.float64))
        self.nb_failed += int(bool(logs.get('failed', False)))
        self.count += 1
        if self.interval and self.count % self.interval == 0:
            self.print_summary(logs['n'])

    def print_summary(self, n):
        if self.moments is None:
            return
        formatted = ''
        for name, mean, std in zip(self.metrics_names, self.moments.mean, self.moments.std):
            formatted += ' - {}: {:.4f} [sd {:.4f}]'.format(name, mean, std)
        print('{} replications at n = {} ({} failed){}'.format(self.count, n, self.nb_failed, formatted))


class FileLogger(Callback):
    """Dump all replication results to a JSON file, keyed by metric name."""
    def __init__(self, filepath, interval=None):
        super(FileLogger, self).__init__()
        self.filepath = filepath
        self.interval = interval
        self.data = {}

    def on_experiment_end(self, logs={}):
        self.save_data()

    def on_replication_end(self, replication, logs={}):
        data = list(logs['metrics'].items())
        data += [('n', logs['n']), ('replication', replication), ('failed', bool(logs.get('failed', False)))]
        for key, value in data:
            if key not in self.data:
                self.data[key] = []
            self.data[key].append(value)

        if self.interval is not None and (replication + 1) % self.interval == 0:
            self.save_data()

    def save_data(self):
        """ Save results in a json file """
        if len(self.data.keys()) == 0:
            return

        order = np.lexsort((self.data['replication'], self.data['n']))
        sorted_data = {}
        for key, values in self.data.items():
            assert len(values) == len(order)
            # np.array(...).tolist() turns numpy scalars into native types json can dump.
            sorted_data[key] = np.array([values[idx] for idx in order]).tolist()

        with open(self.filepath, 'w') as f:
            json.dump(sorted_data, f)


class WandbLogger(Callback):
    """Send replication results to Weights & Biases (`pip install permexp[wandb]`)."""
    def __init__(self, **kwargs):
        super(WandbLogger, self).__init__()
        import wandb
        self.wandb = wandb
        kwargs = dict({'project': 'permexp', 'anonymous': 'allow'}, **kwargs)
        self.wandb.init(**kwargs)
        self.values = {}

    def on_experiment_begin(self, logs={}):
        self.wandb.config.update({'params': self.params})

    def on_size_begin(self, n, logs={}):
        self.values = {}

    def on_replication_end(self, replication, logs={}):
        metrics = dict(logs['metrics'])
        for name, value in metrics.items():
            self.values.setdefault(name, []).append(value)
        self.wandb.log(dict(metrics, n=logs['n'], replication=replication, failed=int(bool(logs.get('failed')))))

    def on_size_end(self, n, logs={}):
        summary = {'n': n}
        with warnings.catch_warnings():
            warnings.filterwarnings('error')
            for name, values in self.values.items():
                try:
                    summary[name + '_mean'] = np.nanmean(values)
                    summary[name + '_sd'] = np.nanstd(values, ddof=1)
                except Warning:
                    summary[name + '_mean'] = float('nan')
                    summary[name + '_sd'] = float('nan')
        self.wandb.log(summary)
