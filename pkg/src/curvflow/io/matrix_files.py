"""Readers and writers for dense matrices and result tables.

Matrices exported by a running training job can be caught half written, so CSV
reads are retried a few times before giving up.
"""

import logging
from pathlib import Path

import numpy as np
import polars as pl
import polars.selectors as cs
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_fixed

from curvflow.errors import GraphFormatError
from curvflow.io.graph_files import JsonReader
from curvflow.io.interfaces import PathLike, ReaderInterface, WriterInterface
from curvflow.utils import SIGNIFICANT_DIGITS

logger = logging.getLogger(__name__)


class MatrixCsvReader(ReaderInterface):
    """Reads n lines of n comma-separated reals"""

    @retry(
        retry=retry_if_exception_type(pl.exceptions.PolarsError),
        wait=wait_fixed(0.2),
        stop=stop_after_attempt(3),
        reraise=True,
    )
    def _read_frame(self, path: PathLike) -> pl.DataFrame:
        return pl.read_csv(path, has_header=False, comment_prefix="#")

    def read(self, path: PathLike) -> np.ndarray:
        """Read a matrix.

        Args:
            path: CSV file without header.

        Returns:
            A float64 array with one row per line.

        Raises:
            GraphFormatError: If the file is missing, ragged or non-numeric.
        """
        try:
            frame = self._read_frame(path)
        except FileNotFoundError as e:
            logger.error(f"Failed to read matrix {path}")
            raise GraphFormatError(f"cannot read '{path}': no such file") from e
        except pl.exceptions.PolarsError as e:
            logger.error(f"Corrupt matrix found in {path}")
            raise GraphFormatError(f"cannot parse '{path}': {e}") from e

        if frame.null_count().sum_horizontal().item() > 0:
            raise GraphFormatError(f"'{path}' has ragged or empty rows")

        try:
            return frame.cast(pl.Float64).to_numpy()
        except pl.exceptions.PolarsError as e:
            raise GraphFormatError(f"'{path}' holds non-numeric entries") from e


class MatrixJsonReader(JsonReader):
    """Reads matrices stored as ``{"n": int, "rows": [[...], ...]}``"""

    def read(self, path: PathLike) -> np.ndarray:
        document = super().read(path)
        if not isinstance(document, dict) or "rows" not in document:
            raise GraphFormatError(f"'{path}' must be an object with 'rows'")

        rows = document["rows"]
        n = document.get("n", len(rows))
        if len(rows) != n or any(not isinstance(row, list) or len(row) != n for row in rows):
            raise GraphFormatError(f"'{path}' declares n={n} but rows do not form an n x n matrix")

        try:
            return np.asarray(rows, dtype=np.float64).reshape(n, n)
        except (TypeError, ValueError) as e:
            raise GraphFormatError(f"'{path}' holds non-numeric entries") from e


def read_matrix(path: PathLike) -> np.ndarray:
    """Read a matrix file, choosing the format from its suffix.

    Args:
        path: ``.json`` for matrix JSON, anything else for CSV.

    Returns:
        The matrix as a float64 array.
    """
    if Path(path).suffix.lower() == ".json":
        return MatrixJsonReader().read(path)
    return MatrixCsvReader().read(path)


class TableCsvWriter(WriterInterface):
    """Writes polars frames as CSV with floats cut to 12 significant digits"""

    def __init__(self, include_header: bool = True) -> None:
        self.include_header = include_header

    def render(self, frame: pl.DataFrame) -> str:
        """Encode a frame as CSV text"""
        frame = frame.with_columns(cs.float().round_sig_figs(SIGNIFICANT_DIGITS))
        return frame.write_csv(include_header=self.include_header)

    def write(self, path: PathLike, payload: pl.DataFrame) -> None:
        """Write a frame to ``path``"""
        Path(path).write_text(self.render(payload))


class MatrixCsvWriter(TableCsvWriter):
    """Writes a square matrix as headerless CSV"""

    def __init__(self) -> None:
        super().__init__(include_header=False)

    def render(self, frame: pl.DataFrame | np.ndarray) -> str:
        if isinstance(frame, np.ndarray):
            frame = pl.DataFrame(np.asarray(frame, dtype=np.float64), orient="row")
        return super().render(frame)
