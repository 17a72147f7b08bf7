from typing import Callable, List, Sequence, TypeVar
import asyncio

from .logger import logger

T = TypeVar("T")

DEFAULT_SIMULTANEOUS_JOBS = 4


async def gather_limited(
        jobs: Sequence[Callable[[], T]],
        simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS,
) -> List[T]:
    """
    Run blocking jobs in worker threads, at most ``simultaneous_jobs`` at a time.

    Args:
        jobs: Zero-argument callables. Each must own its random state.
        simultaneous_jobs: Maximum number of jobs running at once.

    Returns:
        Results in the order of ``jobs``, regardless of completion order.

    Raises:
        The first exception raised by a job; pending jobs are cancelled.
    """
    if simultaneous_jobs < 1:
        raise ValueError(f"simultaneous_jobs must be positive, got {simultaneous_jobs}")
    if not jobs:
        return []

    semaphore = asyncio.Semaphore(simultaneous_jobs)

    async def limited(index: int, job: Callable[[], T]) -> T:
        async with semaphore:
            logger.debug("Starting job %d/%d", index + 1, len(jobs))
            return await asyncio.to_thread(job)

    tasks = [asyncio.create_task(limited(i, job)) for i, job in enumerate(jobs)]
    try:
        return list(await asyncio.gather(*tasks))
    except BaseException:
        for task in tasks:
            if not task.done():
                task.cancel()
        raise
