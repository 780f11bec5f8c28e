"""Process-pool helpers shared by the optimizers and the ensemble oracle."""

from __future__ import annotations

import logging
import os
from multiprocessing import Pool
from typing import TYPE_CHECKING, TypeVar

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable

_log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_cpu_count(cpu_count: int | None) -> int:
    """Number of processes to use, capped by the number of CPUs available to the system.

    `None` selects all available CPUs.
    """
    max_cpus = os.cpu_count() or 1
    resolved = max_cpus if cpu_count is None else max(1, min(cpu_count, max_cpus))
    if cpu_count and resolved < cpu_count:
        _log.warning(f"Tried to set {cpu_count} CPUs, but only {max_cpus} are present in the system.")
    return resolved


def ordered_map(function: Callable[[T], R], items: Iterable[T], cpu_count: int | None = 1) -> list[R]:
    """Maps `function` over `items`, in a process pool when more than one CPU is requested.

    Results are returned in input order, so reductions over them are deterministic.
    """
    items = list(items)
    processes = resolve_cpu_count(cpu_count)
    if processes == 1 or len(items) < 2:  # noqa: PLR2004
        return [function(item) for item in items]
    _log.debug(f"Mapping {len(items)} items over {processes} processes.")
    with Pool(processes) as pool:
        return pool.map(function, items)
