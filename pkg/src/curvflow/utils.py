"""Utility methods that don't belong elsewhere"""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import Any, TypeVar

import numpy as np

from curvflow.config import worker_count

T = TypeVar("T")
R = TypeVar("R")

SIGNIFICANT_DIGITS = 12
"""Significant digits kept for every float that leaves the package as text"""


def ensure_list(items: str | list[str] | None = None, sep: str = ",") -> list[str]:
    """
    Ensures that a list is always received

    Args:
        items: A single separated string or a list of strings.
            If None, defaults to an empty list.
        sep: Separator used to split a single string.

    Returns:
        A list of non-empty, stripped strings.

    Examples:
        >>> ensure_list("rrwp:3, spd:8")
        ['rrwp:3', 'spd:8']
    """
    if items is None or items == "":
        return []
    if isinstance(items, str):
        items = items.split(sep)

    return [item.strip() for item in items if item.strip()]


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Apply ``fn`` to every item on a thread pool.

    Results come back in input order whatever the completion order.

    Args:
        fn: Function applied to each item.
        items: Inputs.
        workers: Thread count. None reads CURVFLOW_THREADS, 1 runs inline.

    Returns:
        The list of results.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def format_float(value: float) -> float:
    """Round a float to 12 significant digits.

    Args:
        value: Any real number.

    Returns:
        The rounded float. Negative zero is folded to zero.
    """
    return float(format(float(value), f".{SIGNIFICANT_DIGITS}g")) + 0.0


def round_floats(payload: Any) -> Any:
    """Recursively apply :func:`format_float` to a JSON-like payload.

    Args:
        payload: Nested dicts, lists, tuples, numpy arrays and scalars.

    Returns:
        The same structure with plain Python floats rounded and arrays turned into lists.
    """
    if isinstance(payload, dict):
        return {key: round_floats(value) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [round_floats(value) for value in payload]
    if isinstance(payload, np.ndarray):
        return round_floats(payload.tolist())
    if isinstance(payload, (bool, np.bool_)):
        return bool(payload)
    if isinstance(payload, (int, np.integer)):
        return int(payload)
    if isinstance(payload, (float, np.floating)):
        return format_float(payload)
    return payload
