"""Small shared helpers for report formatting and bounded parallelism."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
U = TypeVar("U")


def round6(x: float) -> float:
    """Round to 6 significant decimals so serialized reports diff stably."""
    return float(f"{x:.6g}")


def pmap(fn: Callable[[T], U], items: Iterable[T], jobs: int = 1) -> list[U]:
    """Order-preserving map, threaded when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
