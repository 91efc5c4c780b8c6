import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_max_workers(env: str = "CROWDAGG_THREADS") -> int:
    """Parallel trial/restart cap.

    Configured via env var CROWDAGG_THREADS; 1 means run sequentially.
    """
    try:
        max_workers = int(os.getenv(env, "0"))
    except ValueError:
        max_workers = 0
    if max_workers <= 0:
        # numpy already vectorizes each fit, so stay near the core count
        cpu = os.cpu_count() or 2
        max_workers = max(1, min(16, cpu))
    return max_workers


def map_ordered(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """Apply `fn` to every item, possibly concurrently; results keep the input order."""
    items = list(items)
    workers = max_workers if max_workers is not None else resolve_max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items)), thread_name_prefix="crowdagg-worker") as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [f.result() for f in futures]
