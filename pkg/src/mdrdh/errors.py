"""Exception hierarchy.

Every error exposes its class name as a stable machine-readable identifier,
and the CLI maps each name to its own exit status.
"""


class MdrdhError(Exception):
    """Base class for all library errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


# --- codec -----------------------------------------------------------------
class JpegError(MdrdhError):
    pass


class NotBaseline(JpegError):
    pass


class NotGrayscale(JpegError):
    pass


class RestartIntervalsPresent(JpegError):
    pass


class ArithmeticCoding(JpegError):
    pass


class TruncatedStream(JpegError):
    pass


class InvalidMarker(JpegError):
    pass


class NotFullTable(JpegError):
    pass


class NonDefaultTable(JpegError):
    pass


class KraftViolation(JpegError):
    pass


class InvalidCode(JpegError):
    pass


class BlockOverflow(JpegError):
    pass


class UnmappableSymbol(JpegError):
    pass


class NonCanonicalScan(JpegError):
    pass


class CoefficientOverflow(JpegError):
    pass


# --- embedding domains -------------------------------------------------------
class ZeroCoefficient(MdrdhError):
    pass


class MissingSymbol(MdrdhError):
    pass


class InsufficientCapacity(MdrdhError):
    pass


class CapacityExceeded(MdrdhError):
    pass


class PayloadUnderrun(MdrdhError):
    pass


class PayloadOverflow(MdrdhError):
    pass


class NoFeasiblePeak(MdrdhError):
    pass


class NoZeroPoint(MdrdhError):
    pass


class NoDuplicate(MdrdhError):
    pass


class MultipleDuplicates(MdrdhError):
    pass


# --- pipeline ----------------------------------------------------------------
class CapacityError(MdrdhError):
    """Payload does not fit; carries the per-domain capacity report."""

    def __init__(self, message: str, dct_capacity: int = 0, entropy_capacity: int = 0):
        super().__init__(message)
        self.dct_capacity = dct_capacity
        self.entropy_capacity = entropy_capacity


class InsufficientTotalCapacity(CapacityError):
    pass


class NotMarked(MdrdhError):
    pass


class AlreadyMarked(MdrdhError):
    pass


class IntegrityFailure(MdrdhError):
    pass


class DimensionMismatch(MdrdhError):
    pass


# Exit codes are assigned in declaration order so they stay stable.
EXIT_CODES: dict[str, int] = {}


def _collect(cls: type, acc: list) -> None:
    for sub in cls.__subclasses__():
        acc.append(sub)
        _collect(sub, acc)


def _build_exit_codes() -> None:
    classes: list = []
    _collect(MdrdhError, classes)
    for i, cls in enumerate(classes):
        EXIT_CODES[cls.__name__] = 10 + i


_build_exit_codes()
