"""Exception types shared by all modules."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to reach its target accuracy.

    Attributes
    ----------
    achieved : float
        Best error estimate reached before giving up.
    """

    def __init__(self, message, achieved=float("nan")):
        super().__init__(message)
        self.achieved = achieved
