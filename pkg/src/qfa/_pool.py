"""Deterministic process-pool mapping.

Results are always collected in task order, so outputs are identical for
any worker count; tasks must be pure.
"""

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor


def default_workers():
    return os.cpu_count() or 1


def map_ordered(fn, tasks, workers=None):
    """Apply fn over tasks, returning results in task order."""
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx) as ex:
        return list(ex.map(fn, tasks))
