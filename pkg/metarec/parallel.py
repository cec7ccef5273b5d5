"""
Optional process-level parallelism.

Results always come back in task order, so reports assembled from them do
not depend on the number of workers.
"""

import logging
from typing import Any, Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

T = TypeVar("T")

log = logging.getLogger(__name__)


def parallel_map(fn: Callable[..., T], tasks: Iterable[Any], jobs: Optional[int] = None) -> List[T]:
    """Apply fn to every task; jobs of None or 1 runs in-process."""
    tasks = list(tasks)
    if not jobs or jobs == 1 or len(tasks) < 2:
        return [fn(task) for task in tasks]
    log.debug("dispatching %d tasks to %d workers", len(tasks), jobs)
    return Parallel(n_jobs=jobs)(delayed(fn)(task) for task in tasks)
