"""Deterministic fan-out over a process pool.

Tasks run in forked workers that inherit a read-only ``shared`` payload, so
large arrays are not pickled per task. Results come back in task order, which
makes parallel runs indistinguishable from sequential ones.
"""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

_SHARED: Any = None


def _init(shared) -> None:
    global _SHARED
    _SHARED = shared


def shared():
    return _SHARED


def usable_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def run_tasks(fn: Callable, tasks: Sequence, workers: int = 1, payload=None) -> list:
    """Apply ``fn(task)`` to every task; ``payload`` is visible via :func:`shared`."""
    global _SHARED
    tasks = list(tasks)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(tasks) <= 1 or "fork" not in mp.get_all_start_methods():
        prev = _SHARED
        _SHARED = payload
        try:
            return [fn(t) for t in tasks]
        finally:
            _SHARED = prev
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=ctx,
                             initializer=_init, initargs=(payload,)) as pool:
        return list(pool.map(fn, tasks))
