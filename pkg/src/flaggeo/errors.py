"""Exception hierarchy shared by every module."""


class FlagGeoError(Exception):
    """Base class for all errors raised by flaggeo."""


class InvalidInput(FlagGeoError, ValueError):
    """An argument violates a documented precondition."""


class ParseError(InvalidInput):
    """A data file could not be parsed.

    ``line`` is the 1-based line number of the offending row, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LogNearCutLocus(FlagGeoError, ArithmeticError):
    """A rotation angle is too close to pi for the principal logarithm."""


class NoConvergedTrial(FlagGeoError, ArithmeticError):
    """Every solver trial failed; ``pair`` names the offending indices if set."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        self.pair = pair
        super().__init__(message)


class RankDeficient(FlagGeoError, ArithmeticError):
    """The trailing block of the relative frame does not have full rank."""


class NotApplicable(FlagGeoError, ValueError):
    """The dimension reduction does not apply (2k >= n)."""


class RankTooLow(InvalidInput):
    """A data matrix has fewer significant singular values than requested."""


class DegenerateSpectrum(InvalidInput):
    """Tied singular values straddle a flag block boundary."""


class DegenerateSpectrumWarning(UserWarning):
    """Tied singular values inside a single flag block (flag still defined)."""
