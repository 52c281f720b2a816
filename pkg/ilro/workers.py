import os
from concurrent.futures import ProcessPoolExecutor
from logging import getLogger
from typing import Callable, Iterable, List, Optional, TypeVar

from ilro import settings

logger = getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def resolve_jobs(jobs: Optional[int] = None) -> int:
    workers: int = settings.JOBS if jobs is None else jobs
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def map_ordered(fn: Callable[[T], R], items: Iterable[T], jobs: Optional[int] = None) -> List[R]:
    work = list(items)
    workers = min(resolve_jobs(jobs), max(len(work), 1))
    if workers == 1:
        return [fn(item) for item in work]
    logger.debug("fanning %d work items out to %d workers", len(work), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))


__all__ = ('resolve_jobs', 'map_ordered',)
