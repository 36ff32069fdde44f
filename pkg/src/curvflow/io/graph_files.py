"""Readers and writers for graph documents and JSON payloads"""

import json
import logging
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from curvflow.errors import GraphFormatError
from curvflow.io.interfaces import PathLike, ReaderInterface, WriterInterface
from curvflow.utils import round_floats

logger = logging.getLogger(__name__)


class RawEdgeList(NamedTuple):
    """Unvalidated graph content straight from a file"""

    n: int
    edges: list[tuple[int, int, float]]
    name: str | None


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        logger.error(f"Failed to read {path}")
        raise GraphFormatError(f"cannot read '{path}': {e.strerror or e}") from e


class JsonReader(ReaderInterface):
    """Reads any JSON document"""

    def read(self, path: PathLike) -> Any:
        """Parse a JSON file.

        Args:
            path: File to read.

        Returns:
            The decoded document.

        Raises:
            GraphFormatError: If the file is missing or is not valid JSON.
        """
        try:
            return json.loads(_read_text(path))
        except json.JSONDecodeError as e:
            raise GraphFormatError(f"invalid JSON in '{path}': {e.msg} (line {e.lineno})") from e


class GraphJsonReader(JsonReader):
    """Reads graphs stored as ``{"n": int, "edges": [[src, dst, weight], ...], "name": str}``"""

    def read(self, path: PathLike) -> RawEdgeList:
        document = super().read(path)
        if not isinstance(document, dict) or "n" not in document or "edges" not in document:
            raise GraphFormatError(f"'{path}' must be an object with 'n' and 'edges'")

        n = document["n"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise GraphFormatError(f"'n' must be an integer in '{path}'")

        edges = []
        for position, entry in enumerate(document["edges"]):
            if not isinstance(entry, (list, tuple)) or len(entry) != 3:
                raise GraphFormatError(f"edge #{position} in '{path}' must be [src, dst, weight]")
            src, dst, weight = entry
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in (src, dst)):
                raise GraphFormatError(f"edge #{position} in '{path}' has non-integer endpoints")
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                raise GraphFormatError(f"edge #{position} in '{path}' has a non-numeric weight")
            edges.append((src, dst, float(weight)))

        name = document.get("name")
        return RawEdgeList(n, edges, None if name is None else str(name))


class EdgeListReader(ReaderInterface):
    """Reads ``src dst weight`` triples, one per line, with ``#`` comments.

    The vertex count is one more than the largest index seen.
    """

    def read(self, path: PathLike) -> RawEdgeList:
        edges = []
        for lineno, line in enumerate(_read_text(path).splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) != 3:
                raise GraphFormatError(f"{path}:{lineno}: expected 'src dst weight', got '{line}'")
            try:
                edges.append((int(tokens[0]), int(tokens[1]), float(tokens[2])))
            except ValueError as e:
                raise GraphFormatError(f"{path}:{lineno}: {e}") from e

        if not edges:
            raise GraphFormatError(f"'{path}' holds no edges")

        n = max(max(src, dst) for src, dst, _ in edges) + 1
        return RawEdgeList(n, edges, Path(path).stem)


def _to_builtin(value: Any) -> Any:
    if isinstance(value, (np.ndarray, np.generic)):
        return value.tolist()
    raise TypeError(f"object of type {type(value).__name__} is not JSON serializable")


class JsonWriter(WriterInterface):
    """Writes JSON payloads with floats cut to 12 significant digits"""

    def __init__(self, round_output: bool = True) -> None:
        """Initializes

        Args:
            round_output: Round floats before encoding. Graph documents switch
                this off so that weights survive a save/load cycle bit for bit.
        """
        self.round_output = round_output

    def render(self, payload: Any) -> str:
        """Encode a payload as indented JSON text. Numpy arrays and scalars are accepted either way"""
        if self.round_output:
            payload = round_floats(payload)
        return json.dumps(payload, indent=2, default=_to_builtin) + "\n"

    def write(self, path: PathLike, payload: Any) -> None:
        """Write a payload to ``path``"""
        Path(path).write_text(self.render(payload))
