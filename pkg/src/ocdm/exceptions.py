"""Exception types raised by the library."""


class CapacityExceededError(RuntimeError):
    """Raised when inserting into a full :class:`~ocdm.core.MemoryBuffer`."""


class EmptyCountsError(ValueError):
    """Raised when a class distribution is requested from all-zero counts."""


class NoClassesSeenError(ValueError):
    """Raised when a target distribution is requested before any class was seen."""


class InstanceTooLargeError(ValueError):
    """Raised when a brute-force instance exceeds the enumeration guard."""


class ClassAbsentError(ValueError):
    """Raised when a per-class statistic is requested for an absent class."""


class EmptyDatasetError(ValueError):
    pass


class EmptyTraceError(ValueError):
    pass


class StreamParseError(ValueError):
    """Malformed record in a stream file; carries the 1-based line number."""

    def __init__(self, lineno, message):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


class UnknownFieldError(StreamParseError):
    pass
