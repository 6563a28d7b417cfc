"""
Ordered parallel map.

Work is split into independent items whose results are reduced by the caller
in input order, so outputs never depend on the thread count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from os import cpu_count
from typing import Callable, List, Optional, Sequence, TypeVar

from config.base_config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int] = None) -> int:
    requested = threads if threads is not None else settings.threads
    return max(1, min(requested, cpu_count() or 1, 64))


def parallel_map(fn: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """Apply ``fn`` to every item; results come back in input order."""
    workers = resolve_threads(threads)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("parallel_map: %d items on %d threads", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
