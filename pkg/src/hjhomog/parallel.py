"""Replica-parallel execution with order-preserving results."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable

from .pde_core import NonConvergenceError

log = logging.getLogger(__name__)

MAX_DROP_FRACTION = 0.2


class TooManyFailures(RuntimeError):
    """More than the allowed fraction of replicas failed to solve."""


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("HJHOMOG_THREADS", "1")))
    except ValueError:
        return 1


def map_ordered(fn: Callable, items: Iterable, threads: int | None = None) -> list:
    """Apply fn to every item, in parallel threads, returning results in item order."""
    items = list(items)
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads == 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def run_replicas(fn: Callable, replicas: Iterable[int], threads: int | None = None,
                 what: str = "replica") -> list:
    """Like map_ordered, but solver failures become None and are logged.

    Raises TooManyFailures when more than 20% of the replicas fail.
    """
    replicas = list(replicas)

    def guarded(r):
        try:
            return fn(r)
        except NonConvergenceError as exc:
            log.warning("%s %d dropped: %s", what, r, exc)
            return None

    out = map_ordered(guarded, replicas, threads)
    dropped = sum(o is None for o in out)
    if replicas and dropped > MAX_DROP_FRACTION * len(replicas):
        raise TooManyFailures(f"{dropped} of {len(replicas)} {what}s failed")
    return out
