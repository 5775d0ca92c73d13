class PermexpError(Exception):
    """Base class for all errors raised by permexp."""


class NumericalError(PermexpError, RuntimeError):
    """A computation could not produce a trustworthy number.

    The command line maps this family to exit code 3.
    """


class DegenerateError(NumericalError):
    """The pseudo-likelihood is flat in some direction, so no root is identified."""


class NoBracketError(NumericalError):
    """The scalar gradient keeps one sign over the whole search bracket."""


class SingularMatrixError(NumericalError):
    """A matrix that has to be inverted is (numerically) singular."""


class ConvergenceError(NumericalError):
    """An iterative method stopped before reaching its tolerance."""


class BoundaryError(NumericalError):
    """The observed statistic sits on the boundary of its convex hull (MLE diverges)."""


class ExperimentAbortedError(NumericalError):
    """Too many replications of an experiment failed."""


class NotCenteredError(PermexpError, ValueError):
    """An operation requires doubly centered statistic components."""
