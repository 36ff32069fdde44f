"""Core classes used by readers and writers"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

PathLike = str | Path


class ReaderInterface(ABC):
    """Abstract implementation for a file reader"""

    @abstractmethod
    def read(self, path: PathLike) -> Any:
        """Reads data from a file"""


class WriterInterface(ABC):
    """Abstract implementation for a file writer"""

    @abstractmethod
    def write(self, path: PathLike, payload: Any) -> None:
        """Writes a payload to a file"""
