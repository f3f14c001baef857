"""
Exceptions raised by the djcalib library. Every exception carries the exit status
that the command line interface reports when the error reaches it.
"""

# Exit statuses for the command line interface.
USAGE_ERROR = 1
DATA_ERROR = 2


class CalibrationError(Exception):
    """
    Base class for all errors raised by the djcalib library.
    """

    status = DATA_ERROR

    def __init__(self, message: str = "calibration error", status: int = None):
        """
        Initialize the error with a message and an optional exit status.

        :param message: A human readable description of the error.
        :param status: The exit status to report from the command line.
        """
        self.message = message
        if status is not None:
            self.status = status
        super().__init__(message)


class SimplexViolation(CalibrationError):
    """
    A vector is not a point of the probability simplex.
    """


class SumOutOfTolerance(SimplexViolation):
    """
    The entries of a vector do not sum to one within tolerance.
    """


class IndexOutOfRange(CalibrationError):
    pass


class NonFiniteInput(CalibrationError):
    pass


class DimensionMismatch(CalibrationError):
    pass


class InvalidSpec(CalibrationError):
    """
    A lens, selector, distance, binning, or generator spec is malformed.
    """

    status = USAGE_ERROR


class InvalidLensForK(InvalidSpec):
    pass


class PartialMap(InvalidSpec):
    pass


class EmptyGroup(InvalidSpec):
    pass


class InvalidClassIndex(InvalidSpec):
    pass


class InvalidSeed(InvalidSpec):
    pass


class InvalidSelector(InvalidSpec):
    pass


class DistanceLensMismatch(InvalidSpec):
    pass


class InterIntervalOnNonScalar(DistanceLensMismatch):
    pass


class NonPSDMatrix(InvalidSpec):
    """
    A weight matrix is not positive semi-definite.
    """

    def __init__(self, eigenvalue: float, status: int = None):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"weight matrix is not positive semi-definite (eigenvalue {eigenvalue:.6g})",
            status=status,
        )


class EmptySelection(CalibrationError):
    pass


class FractionTooSmall(CalibrationError):
    pass


class MissingLogits(CalibrationError):
    pass


class MissingProbs(CalibrationError):
    """
    A record or dataset has neither probabilities nor logits.
    """


class DegenerateValidation(CalibrationError):
    pass


class ParseError(CalibrationError):
    """
    A prediction file could not be parsed; the line number is one-based.
    """

    def __init__(self, message: str, line: int = None, status: int = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, status=status)


class InconsistentWidth(ParseError):
    pass
