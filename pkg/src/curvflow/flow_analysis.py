"""Curvature distributions of propagation matrices exported during training.

A manifest lists one matrix file per epoch. Every matrix becomes a graph, every
ordered pair of that graph gets a curvature, and each epoch is summarized by its
quantiles and a fixed-range histogram. ``decurve_score`` is the drop of the median
curvature from the first epoch to the last.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl

from curvflow.curvature import QUANTILES, CurvatureReport, curc, lb1
from curvflow.errors import CurvflowError, GraphFormatError, SeriesError
from curvflow.graph_core import (
    DenseMatrix,
    DirectedWeightedGraph,
    as_dense_matrix,
    assert_strongly_connected,
    from_dense,
    load_matrix,
)
from curvflow.io.graph_files import JsonReader
from curvflow.io.interfaces import PathLike
from curvflow.utils import parallel_map

logger = logging.getLogger(__name__)

HISTOGRAM_RANGE = (-3.0, 1.0)
"""Curvatures outside this range are clamped into the end bins"""

HISTOGRAM_BINS = 20


class Estimator(StrEnum):
    CURC = "curc"
    LB1 = "lb1"


@dataclass(frozen=True)
class EpochSeries:
    """Propagation matrices indexed by strictly increasing epochs"""

    epochs: list[tuple[int, DenseMatrix]]
    graph_name: str | None
    threshold: float
    graphs: dict[int, DirectedWeightedGraph]

    @classmethod
    def from_matrices(
        cls,
        matrices: Iterable[tuple[int, Any]],
        threshold: float = 0.0,
        graph_name: str | None = None,
        files: dict[int, str] | None = None,
    ) -> "EpochSeries":
        """Validate and sort a series of ``(epoch, matrix)`` entries.

        Raises:
            SeriesError: On duplicate epochs, mismatched dimensions, or an epoch
                whose graph is empty or not strongly connected.
        """
        files = files or {}
        entries = sorted(((int(epoch), matrix) for epoch, matrix in matrices), key=lambda entry: entry[0])
        if not entries:
            raise SeriesError("series has no epochs")

        epochs, graphs = [], {}
        for epoch, matrix in entries:
            where = files.get(epoch, f"epoch {epoch}")
            if epoch in graphs:
                raise SeriesError(f"epoch {epoch} listed twice", epoch=epoch)
            try:
                matrix = as_dense_matrix(matrix)
            except CurvflowError as e:
                raise SeriesError(f"{where}: {e.message}", epoch=epoch, file=files.get(epoch)) from e
            if epochs and matrix.shape != epochs[0][1].shape:
                raise SeriesError(
                    f"{where}: matrix is {matrix.shape[0]}x{matrix.shape[1]}, expected "
                    f"{epochs[0][1].shape[0]}x{epochs[0][1].shape[1]}",
                    epoch=epoch,
                    file=files.get(epoch),
                )
            try:
                graph = from_dense(matrix, threshold, graph_name)
                assert_strongly_connected(graph, "flow_analysis")
            except CurvflowError as e:
                raise SeriesError(f"epoch {epoch}: {e.message}", epoch=epoch, file=files.get(epoch)) from e

            epochs.append((epoch, matrix))
            graphs[epoch] = graph

        return cls(epochs, graph_name, threshold, graphs)

    @property
    def epoch_indices(self) -> list[int]:
        return [epoch for epoch, _ in self.epochs]

    def graph(self, epoch: int) -> DirectedWeightedGraph:
        """Graph of one epoch.

        Raises:
            SeriesError: If the epoch is not in the series.
        """
        if epoch not in self.graphs:
            raise SeriesError(f"epoch {epoch} is not in the series", epoch=epoch)
        return self.graphs[epoch]


def load_epoch_series(manifest: PathLike) -> EpochSeries:
    """Read a manifest and the matrices it lists.

    The manifest is ``{"graph_name": str, "threshold": float, "epochs": [{"epoch": int, "file": path}]}``.
    Relative file paths are resolved against the manifest's directory.

    Raises:
        SeriesError: If the manifest is malformed or any listed matrix is invalid.
    """
    try:
        document = JsonReader().read(manifest)
    except GraphFormatError as e:
        raise SeriesError(e.message, file=str(manifest)) from e

    if not isinstance(document, dict) or not isinstance(document.get("epochs"), list):
        raise SeriesError(f"'{manifest}' must be an object with an 'epochs' list", file=str(manifest))

    base = Path(manifest).parent
    matrices, files = [], {}
    for entry in document["epochs"]:
        if not isinstance(entry, dict) or "epoch" not in entry or "file" not in entry:
            raise SeriesError(f"'{manifest}': every epoch needs 'epoch' and 'file'", file=str(manifest))

        epoch = int(entry["epoch"])
        path = base / entry["file"]
        try:
            matrix = load_matrix(path)
        except CurvflowError as e:
            raise SeriesError(f"{path}: {e.message}", epoch=epoch, file=str(path)) from e

        logger.debug(f"Loaded epoch {epoch} from {path}")
        matrices.append((epoch, matrix))
        files[epoch] = str(path)

    return EpochSeries.from_matrices(
        matrices,
        threshold=float(document.get("threshold", 0.0)),
        graph_name=document.get("graph_name"),
        files=files,
    )


@dataclass(frozen=True)
class TrendRow:
    """Curvature distribution of one epoch"""

    epoch: int
    count: int
    min: float
    mean: float
    quantiles: dict[str, float]
    histogram: list[int]

    @property
    def median(self) -> float:
        return self.quantiles["p50"]

    @classmethod
    def from_report(cls, epoch: int, report: CurvatureReport) -> "TrendRow":
        kappa = np.fromiter(report.values.values(), dtype=np.float64)
        summary = report.summary
        counts, _ = np.histogram(np.clip(kappa, *HISTOGRAM_RANGE), bins=HISTOGRAM_BINS, range=HISTOGRAM_RANGE)
        return cls(
            epoch=epoch,
            count=summary["count"],
            min=summary["min"],
            mean=summary["mean"],
            quantiles=summary["quantiles"],
            histogram=[int(c) for c in counts],
        )


def histogram_edges() -> list[float]:
    """The HISTOGRAM_BINS + 1 fixed bin edges"""
    return np.linspace(*HISTOGRAM_RANGE, HISTOGRAM_BINS + 1).tolist()


@dataclass(frozen=True)
class TrendReport:
    graph_name: str | None
    estimator: Estimator
    rows: list[TrendRow]
    decurve_score: float
    """Median curvature of the first epoch minus that of the last"""

    def to_dict(self) -> dict[str, Any]:
        return {
            "graph_name": self.graph_name,
            "estimator": str(self.estimator),
            "histogram_edges": histogram_edges(),
            "rows": [
                {
                    "epoch": row.epoch,
                    "count": row.count,
                    "min": row.min,
                    "mean": row.mean,
                    "quantiles": row.quantiles,
                    "histogram": row.histogram,
                }
                for row in self.rows
            ],
            "decurve_score": self.decurve_score,
        }

    def to_frame(self) -> pl.DataFrame:
        """One row per epoch, ready for plotting"""
        return pl.DataFrame(
            [
                {
                    "epoch": row.epoch,
                    "count": row.count,
                    "min": row.min,
                    "mean": row.mean,
                    **{f"p{q}": row.quantiles[f"p{q}"] for q in QUANTILES},
                    **{f"bin{i:02d}": c for i, c in enumerate(row.histogram)},
                }
                for row in self.rows
            ]
        )


def _epoch_report(graph: DirectedWeightedGraph, estimator: Estimator) -> CurvatureReport:
    if estimator is Estimator.LB1:
        return lb1(graph)
    return curc(graph, workers=1)


def trend(series: EpochSeries, estimator: Estimator | str = Estimator.CURC, workers: int | None = None) -> TrendReport:
    """Summarize the curvature distribution of every epoch.

    Args:
        series: Validated series.
        estimator: ``curc`` for exact curvature, ``lb1`` for its cheap lower bound.
        workers: Thread count across epochs.

    Returns:
        One row per epoch in epoch order, and the decurve score.

    Raises:
        SeriesError: If curvature fails on some epoch.
    """
    estimator = Estimator(estimator)

    def summarize(epoch: int) -> TrendRow:
        logger.debug(f"Computing {estimator} for epoch {epoch}")
        try:
            return TrendRow.from_report(epoch, _epoch_report(series.graph(epoch), estimator))
        except SeriesError:
            raise
        except CurvflowError as e:
            raise SeriesError(f"epoch {epoch}: {e}", epoch=epoch) from e

    rows = parallel_map(summarize, series.epoch_indices, workers)
    return TrendReport(series.graph_name, estimator, rows, rows[0].median - rows[-1].median)


def curvature_map(series: EpochSeries, epoch: int) -> DenseMatrix:
    """CURC of every ordered pair of one epoch as a matrix with a zero diagonal"""
    graph = series.graph(epoch)
    kappa = np.zeros((graph.n, graph.n))
    for (x, y), value in curc(graph).values.items():
        kappa[x, y] = value
    return kappa
