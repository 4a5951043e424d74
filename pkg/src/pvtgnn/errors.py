"""Exception hierarchy.

Every error raised by the package derives from :class:`PVTGNNError`, which is
itself a ``ValueError`` so callers that only care about bad input can catch the
builtin.
"""


class PVTGNNError(ValueError):
    """Base class for all package errors."""


# numerics / model
class DimensionMismatch(PVTGNNError):
    pass


class ShapeMismatch(PVTGNNError):
    pass


class ZeroFanIn(PVTGNNError):
    pass


class BadDims(PVTGNNError):
    pass


# graph
class InvalidEdge(PVTGNNError):
    pass


class NotNeighbor(PVTGNNError):
    pass


# gradients / training
class EmptyBatch(PVTGNNError):
    pass


class DegenerateColumn(PVTGNNError):
    pass


class TooFewWindows(PVTGNNError):
    pass


class BadTrainConfig(PVTGNNError):
    pass


# anomaly / metrics
class LengthMismatch(PVTGNNError):
    pass


class EmptyInput(PVTGNNError):
    pass


class DegenerateSpread(PVTGNNError):
    pass


class TooFew(PVTGNNError):
    pass


class NoQualifyingSamples(PVTGNNError):
    pass


# data
class BadHeader(PVTGNNError):
    pass


class BadRow(PVTGNNError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class NonMonotonicTimestamps(PVTGNNError):
    pass


class TooShort(PVTGNNError):
    pass


class BadConfig(PVTGNNError):
    pass


class BadFraction(PVTGNNError):
    pass


class VersionMismatch(PVTGNNError):
    pass


class CorruptCheckpoint(PVTGNNError):
    pass
