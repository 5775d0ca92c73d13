# Inspired from VecEnv from OpenAI Baselines


class ReplicationPool(object):
    """
    Runs a fixed task function over a list of task arguments and returns
    the results in task order, however the work is scheduled.
    """
    def __init__(self, num_workers):
        self.num_workers = num_workers

    def run(self, tasks):
        """
        Apply the task function to every element of `tasks`.
        Returns a list with one result per task, in the order of `tasks`.
        """
        raise NotImplementedError()

    def close(self):
        """
        Clean up the workers' resources.
        """
        pass

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()


class SerialReplicationPool(ReplicationPool):
    """
    Runs every task in the calling process.
    """
    def __init__(self, task_fn):
        ReplicationPool.__init__(self, 1)
        self.task_fn = task_fn

    def run(self, tasks):
        return [self.task_fn(task) for task in tasks]


class CloudpickleWrapper(object):
    """
    Uses cloudpickle to serialize contents (otherwise multiprocessing tries to use pickle)
    """
    def __init__(self, x):
        self.x = x

    def __getstate__(self):
        import cloudpickle
        return cloudpickle.dumps(self.x)

    def __setstate__(self, ob):
        import pickle
        self.x = pickle.loads(ob)
