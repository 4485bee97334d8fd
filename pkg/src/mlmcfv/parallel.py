"""Fork-join helpers with a worker-count-independent result contract.

Work is split into chunks whose boundaries depend only on the problem (never
on the worker count), every chunk is a pure function of its task, and results
are reduced in task order.  Consequently byte-identical outputs are obtained
with any number of workers.
"""

import os
from concurrent.futures import ProcessPoolExecutor


def auto_workers():
    return max(1, os.cpu_count() or 1)


def rows_per_chunk(n_cells, target_elements=1 << 18, cap=4096):
    """Sample rows per chunk: capped so a chunk's state stays cache resident."""
    return int(max(16, min(cap, target_elements // max(1, n_cells))))


def chunk_ranges(total, rows):
    return [(lo, min(lo + rows, total)) for lo in range(0, total, rows)]


def map_ordered(fn, tasks, workers=1):
    """Apply fn to every task, returning results in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
