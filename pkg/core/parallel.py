import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def pool_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1,
             progress: Optional[str] = None) -> List[R]:
    """Map ``fn`` over ``items`` keeping input order.

    With ``workers > 1`` the calls run in a process pool, so ``fn`` and its
    arguments must be picklable (top-level functions, plain data).
    """
    items = list(items)
    show = progress is not None and len(items) > 1
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in tqdm(items, desc=progress, disable=not show, leave=False)]

    logger.debug("dispatching %d tasks to %d workers", len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        results = executor.map(fn, items, chunksize=max(1, len(items) // (4 * workers)))
        return list(tqdm(results, total=len(items), desc=progress, disable=not show, leave=False))
