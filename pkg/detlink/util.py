from itertools import chain
from typing import Any, Callable, Generator, List, Sequence

from joblib import Parallel, delayed, effective_n_jobs

__all__ = ("parallel_map",)


def _chunks(items: Sequence, n_jobs: int) -> Generator:
    if len(items) == 0 or not n_jobs:
        yield items
        return

    chunksize = -(-len(items) // n_jobs)
    for pos in range(0, len(items), chunksize):
        yield items[pos : pos + chunksize]


def _join_chunks(chunks) -> list:
    return list(chain.from_iterable(chunks))


# Module-level so joblib can pickle it for process-based backends.
def _apply_chunk(func, chunk, kwargs) -> list:
    return [func(item, **kwargs) for item in chunk]


def parallel_map(func: Callable, items: Sequence, n_jobs=None, **kwargs) -> List[Any]:
    """
    Apply ``func`` to every item, preserving order.

    The items are split into one contiguous batch per worker and each batch is
    processed by :class:`joblib.Parallel`.

    :param func: A picklable callable taking one item (plus ``kwargs``).
    :param items: The items to process.
    :type items: sequence.
    :param n_jobs: The maximum number of parallel processes to run. If
            n_jobs = -1, all the CPUs are used. For n_jobs below -1,
            (n_cpus + 1 + n_jobs) are used. Thus for n_jobs = -2, all CPUs
            but one are used. See :class:`joblib.Parallel` for more details on
            this parameter.
    :type n_jobs: int, default = None

    :return: ``[func(item, **kwargs) for item in items]``.
    :rtype: list
    """
    items = list(items)
    n_jobs = effective_n_jobs(n_jobs)
    if n_jobs == 1 or len(items) <= 1:
        return _apply_chunk(func, items, kwargs)

    with Parallel(n_jobs=n_jobs) as parallel:
        results = parallel(
            delayed(_apply_chunk)(func, chunk, kwargs)
            for chunk in _chunks(items, n_jobs)
        )

    return _join_chunks(results)
