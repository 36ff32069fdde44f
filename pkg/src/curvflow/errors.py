"""Exceptions raised by curvflow.

Every error names the module it came from so that the command line can print
module-qualified messages.
"""

from collections.abc import Sequence


class CurvflowError(Exception):
    """Root of all domain errors"""

    module: str = "curvflow"
    """Short name of the module that raised the error"""

    def __init__(self, message: str, module: str | None = None) -> None:
        super().__init__(message)
        self.message = message
        if module is not None:
            self.module = module

    def __str__(self) -> str:
        return f"{self.module}: {self.message}"


class GraphFormatError(CurvflowError, ValueError):
    """A graph or matrix file could not be parsed"""

    module = "graph_core"


class NonPositiveWeightError(GraphFormatError):
    """An edge weight is zero or negative"""


class VertexIndexError(GraphFormatError):
    """A vertex index lies outside [0, n)"""


class EmptyGraphError(GraphFormatError):
    """Ingestion left a graph without any edges"""


class DimensionError(CurvflowError, ValueError):
    """Array shapes do not agree with the graph or with each other"""


class NotStronglyConnectedError(CurvflowError):
    """The graph has more than one strongly connected component"""

    module = "graph_core"

    def __init__(self, components: Sequence[Sequence[int]], module: str | None = None) -> None:
        self.components = [sorted(c) for c in components]
        self.components.sort(key=lambda c: c[0])
        super().__init__(f"graph is not strongly connected, components {self.components}", module)


class ConvergenceError(CurvflowError):
    """An iterative solver hit its iteration cap"""

    module = "spectral"


class SingularSystemError(CurvflowError):
    """A linear system that should have a unique solution is singular"""

    module = "spectral"


class InfeasibleMarginalsError(CurvflowError, ValueError):
    """Two measures handed to the transport solver do not have equal mass"""

    module = "transport"


class LPError(CurvflowError):
    """A linear program that is feasible by construction failed to solve"""

    module = "transport"


class DomainError(CurvflowError, ValueError):
    """The input violates a precondition of the requested quantity"""

    module = "curvature"


class RegionTooLargeError(CurvflowError):
    """A brute-force enumeration would exceed its size cap"""

    module = "isoperimetry"


class ColorCollisionError(CurvflowError):
    """Two different refinement payloads hashed to the same colour id"""

    module = "wl_expressiveness"


class ConfigError(CurvflowError, ValueError):
    """A configuration value or document is invalid"""

    module = "config"


class SeriesError(CurvflowError):
    """An epoch series is malformed. Names the offending epoch or file"""

    module = "flow_analysis"

    def __init__(self, message: str, epoch: int | None = None, file: str | None = None) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.file = file
