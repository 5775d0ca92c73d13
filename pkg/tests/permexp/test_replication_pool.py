import pytest

from permexp.common.cmd_util import make_replication_pool
from permexp.common.vec_rep import SerialReplicationPool
from permexp.common.vec_rep.subproc_rep_pool import SubprocReplicationPool


def square(task):
    n, replication = task
    return n * replication


def fail_on_three(task):
    if task == 3:
        raise ArithmeticError('three')
    return task


def test_serial_pool():
    pool = make_replication_pool(square, num_workers=1)
    assert isinstance(pool, SerialReplicationPool)
    assert pool.run([(2, r) for r in range(4)]) == [0, 2, 4, 6]


def test_subprocess_pool_keeps_task_order():
    tasks = [(3, r) for r in range(11)]
    with make_replication_pool(square, num_workers=3) as pool:
        assert isinstance(pool, SubprocReplicationPool)
        assert pool.run(tasks) == [square(task) for task in tasks]
        assert pool.run([]) == []
    assert pool.closed


def test_subprocess_pool_ships_closures():
    offset = 10
    with make_replication_pool(lambda task: task + offset, num_workers=2) as pool:
        assert pool.run([1, 2, 3]) == [11, 12, 13]


def test_subprocess_pool_reports_worker_errors():
    with make_replication_pool(fail_on_three, num_workers=2) as pool:
        with pytest.raises(RuntimeError) as excinfo:
            pool.run(list(range(6)))
        assert 'ArithmeticError' in str(excinfo.value)
        # The workers survive a failed batch.
        assert pool.run([0, 1]) == [0, 1]


def test_invalid_worker_count():
    with pytest.raises(ValueError):
        make_replication_pool(square, num_workers=0)


if __name__ == '__main__':
    pytest.main([__file__])
