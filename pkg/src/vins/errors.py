"""Exception types shared across the toolkit."""


class VinsError(Exception):
    """Base class for all toolkit errors."""


class MalformedRow(VinsError):
    """A CSV row failed parsing or violated a field-level sanity bound."""

    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class NonMonotoneTime(VinsError):
    """Timestamps are not strictly increasing."""


class GapTooLarge(VinsError):
    """Gap between consecutive samples exceeds the allowed multiple of the nominal period."""


class EmptyFile(VinsError):
    """Input file contains a header but no data rows."""


class EmptyInput(VinsError):
    """An operation received an empty sequence where data is required."""


class OutOfRange(VinsError):
    """Query time lies outside the covered time span."""


class InsufficientOverlap(VinsError):
    """Two time series do not overlap long enough for the requested operation."""


class BadArguments(VinsError):
    """Arguments violate a precondition (counts, ranges)."""


class BadDt(VinsError):
    """Integration time step outside the accepted range."""


class BadSpec(VinsError):
    """Trajectory or noise specification is invalid."""


class ShapeMismatch(VinsError):
    """Tensor shapes are inconsistent with the network architecture."""


class StaleCache(VinsError):
    """Backward pass received a cache produced by a different forward call."""


class CorruptWeights(VinsError):
    """Weight file is truncated, has a bad magic, or inconsistent shapes."""


class InsufficientData(VinsError):
    """Not enough windows to train or evaluate."""


class InsufficientSamples(VinsError):
    """Detector window holds fewer samples than required."""
