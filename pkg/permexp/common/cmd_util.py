# Inspired from OpenAI Baselines
from permexp.common.vec_rep import SerialReplicationPool
from permexp.common.vec_rep.subproc_rep_pool import SubprocReplicationPool


def make_replication_pool(task_fn, num_workers=1):
    """
    Create a SubprocReplicationPool for `num_workers > 1`, otherwise run tasks in process.
    """
    if num_workers < 1:
        raise ValueError('num_workers must be >= 1, is {}'.format(num_workers))
    if num_workers == 1:
        return SerialReplicationPool(task_fn)
    return SubprocReplicationPool(task_fn, num_workers)
