"""Exception types shared across the package."""


class DFFError(ValueError):
    """Base class for invalid inputs and numerical failures."""


class StackReadError(OSError):
    """An image file of a stack could not be read."""


class MismatchedStack(DFFError):
    pass


class TooFewSlices(DFFError):
    pass


class InvalidWindow(DFFError):
    pass


class InvalidKernel(DFFError):
    pass


class Underdetermined(DFFError):
    pass


class IllConditionedFit(DFFError):
    pass


class InvalidPenalty(DFFError):
    pass


class InvalidThreshold(DFFError):
    pass


class InvalidShape(DFFError):
    pass


class DivergenceDetected(ArithmeticError):
    """A solver iterate became NaN or infinite.

    ``state`` holds the last finite solver state for post-mortem inspection.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class HypothesisViolated(UserWarning):
    """Step size too large for the convex convergence guarantee."""
