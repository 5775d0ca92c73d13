# Inspired from OpenAI Baselines
import traceback
from multiprocessing import Process, Pipe

from permexp.common.vec_rep import ReplicationPool, CloudpickleWrapper


def worker(remote, parent_remote, task_fn_wrapper):
    parent_remote.close()
    task_fn = task_fn_wrapper.x
    while True:
        cmd, data = remote.recv()
        if cmd == 'run':
            results = []
            try:
                for index, task in data:
                    results.append((index, task_fn(task)))
            except Exception:
                remote.send(('error', traceback.format_exc()))
            else:
                remote.send(('ok', results))
        elif cmd == 'close':
            remote.close()
            break
        else:
            raise NotImplementedError


class SubprocReplicationPool(ReplicationPool):
    def __init__(self, task_fn, num_workers):
        """
        task_fn: function applied to every task, shipped to the workers with cloudpickle
        num_workers: number of worker processes
        """
        assert num_workers >= 1
        ReplicationPool.__init__(self, num_workers)
        self.closed = False
        self.remotes, self.work_remotes = zip(*[Pipe() for _ in range(num_workers)])
        self.ps = [Process(target=worker, args=(work_remote, remote, CloudpickleWrapper(task_fn)))
                   for (work_remote, remote) in zip(self.work_remotes, self.remotes)]
        for p in self.ps:
            p.daemon = True # if the main process crashes, we should not cause things to hang
            p.start()
        for remote in self.work_remotes:
            remote.close()

    def run(self, tasks):
        tasks = list(tasks)
        # Task k goes to worker k mod num_workers; results are reassembled by index.
        for rank, remote in enumerate(self.remotes):
            remote.send(('run', [(index, tasks[index]) for index in range(rank, len(tasks), self.num_workers)]))
        results = [None] * len(tasks)
        errors = []
        for remote in self.remotes:
            status, payload = remote.recv()
            if status == 'error':
                errors.append(payload)
                continue
            for index, result in payload:
                results[index] = result
        if errors:
            raise RuntimeError('A replication worker failed:\n{}'.format(errors[0]))
        return results

    def close(self):
        if self.closed:
            return
        for remote in self.remotes:
            remote.send(('close', None))
        for p in self.ps:
            p.join()
        self.closed = True
