"""
Parallel helpers with a fixed reduction order

Work is split into chunks whose results are gathered in submission order and
combined by a pairwise tree, so the floating-point result does not depend on
how many threads ran or in which order they finished.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from config import config

T = TypeVar("T")
R = TypeVar("R")


def thread_count(threads: Optional[int] = None) -> int:
    """Effective worker count, capped by BKLAB_THREADS"""
    if threads is None:
        return config.THREADS
    return max(1, min(int(threads), config.THREADS))


def ordered_map(func: Callable[[T], R], items: Sequence[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply func to every item, possibly concurrently

    Args:
        func: Pure function of one item
        items: Work items
        threads: Worker cap (defaults to BKLAB_THREADS)

    Returns:
        Results in the order of items
    """
    workers = thread_count(threads)
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def pairwise_sum(parts: Sequence):
    """Tree-reduce a sequence of arrays (or scalars) in a fixed order"""
    if not parts:
        raise ValueError("Nothing to reduce")
    level = list(parts)
    while len(level) > 1:
        paired = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]


def chunk_ranges(n: int, chunks: int) -> List[range]:
    """Split range(n) into at most `chunks` contiguous, nearly equal pieces"""
    chunks = max(1, min(chunks, n))
    bounds = [round(i * n / chunks) for i in range(chunks + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(chunks) if bounds[i + 1] > bounds[i]]
