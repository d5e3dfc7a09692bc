"""Exception hierarchy shared by all modules."""


class QRiskError(Exception):
    """Base class for engine errors."""


class ConfigurationError(QRiskError, ValueError):
    """Invalid parameters, layouts or levels."""


class DegenerateInputError(QRiskError, ValueError):
    """Input carries no usable information (zero density, collapsed payoff range)."""


class DegenerateWindowError(DegenerateInputError):
    """A conditional expectation was requested over an empty window."""


class ResourceError(QRiskError):
    """Requested circuit exceeds the simulator qubit budget."""


class ConvergenceError(QRiskError):
    """An iterative estimator hit its budget before reaching the target precision.

    ``interval`` holds the last confidence interval when one is available.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class IllConditionedError(QRiskError):
    """A conditional expectation's estimated denominator fell below the floor."""

    def __init__(self, message, mass=None):
        super().__init__(message)
        self.mass = mass


class InconsistentQuantilesError(QRiskError):
    """Estimated window bounds came out in the wrong order."""
