"""Runtime settings read from the environment"""

import os

from curvflow.errors import ConfigError

THREADS_ENV = "CURVFLOW_THREADS"
"""Caps the number of worker threads. 0 or unset means one per CPU"""

LOG_LEVEL_ENV = "CURVFLOW_LOG_LEVEL"
"""Name of the log level used by the command line"""


def worker_count() -> int:
    """Number of worker threads to use for parallel maps.

    Returns:
        A positive worker count.

    Raises:
        ConfigError: If CURVFLOW_THREADS is not a non-negative integer.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1

    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got '{raw}'")

    if value < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {value}")

    return value or (os.cpu_count() or 1)
