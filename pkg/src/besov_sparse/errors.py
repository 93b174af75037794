"""Exception hierarchy shared by all modules."""


class BesovSparseError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(BesovSparseError, ValueError):
    """A parameter or field violates an operation's preconditions."""


class FormatError(BesovSparseError):
    """A field file is malformed.

    ``offset`` is the byte offset at which the problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DegenerateError(BesovSparseError, ValueError):
    """A measurement is undefined (empty ball, vanishing test function, ...)."""


class HypothesisViolation(InvalidInputError):
    """Parameters fall outside the range where the mixing estimate applies."""


class CalibrationError(BesovSparseError):
    """The calibration trial family produced no usable constraint."""


class RejectedStep(BesovSparseError):
    """Time step exceeds the stability bound; ``dt_max`` is admissible."""

    def __init__(self, dt, dt_max):
        super().__init__(f"dt={dt:.6g} exceeds the admissible step {dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max
