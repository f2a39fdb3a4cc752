"""
Thread-pool helpers shared by contour quadrature, sweeps and suites.

Results always come back in input order, whatever the scheduling, so any
reduction over them is reproducible bit for bit.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    """Machine parallelism, used when no thread cap is given."""
    return os.cpu_count() or 1


def ordered_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: Optional[int] = 1
) -> List[R]:
    """
    Apply `fn` to every item and return the results in input order.

    max_workers <= 1 runs inline on the calling thread. Exceptions raised by
    `fn` propagate to the caller (the first one in input order wins).
    """
    items = list(items)
    workers = default_workers() if max_workers is None else max_workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))
