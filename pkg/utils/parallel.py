"""
Bounded worker pool for per-recording work.

Recordings are independent, so commands that touch several files fan out over a
thread pool (numpy, scipy and torch release the GIL in their kernels). Results come
back in input order regardless of completion order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")


def map_jobs(
    func: Callable[[ItemT], ResultT],
    items: Iterable[ItemT],
    jobs: int = 1,
) -> list[ResultT]:
    """
    Apply ``func`` to each item with at most ``jobs`` workers.

    Args:
        func: Callable applied to each item
        items: Work items
        jobs: Maximum number of concurrent workers (1 runs inline)

    Returns:
        Results in the order of ``items``
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    logger.debug(f"Running {len(items)} jobs on {jobs} workers")
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))
