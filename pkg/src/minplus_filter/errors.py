"""Exception types raised by the filter library."""


class ContractError(ValueError):
    """Shapes or dimensions do not agree."""


class NotStrictlyConvex(ValueError):
    """A quadratic coefficient matrix is not positive definite."""

    def __init__(self, min_eigenvalue, message=None):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(
            message
            or f"quadratic is not strictly convex (min eigenvalue {self.min_eigenvalue:.3e})"
        )


class InvalidWeight(ValueError):
    """A weighting matrix is asymmetric or not positive semidefinite."""


class InvalidPrior(ValueError):
    """The prior weight L is not symmetric positive definite."""


class IrreversibleDynamics(ValueError):
    """The forward dynamics matrix cannot be inverted."""


class DegenerateDisturbance(ValueError):
    """The reversed disturbance gain is singular."""


class SequencingError(ValueError):
    """A measurement frame arrived out of order."""


class NoSensorYet(LookupError):
    """A term has an empty lineage, so no sensor has been selected."""


class OracleRangeError(RuntimeError):
    """A brute-force grid does not cover the optimum it is searching for."""


class OracleNonConvergence(RuntimeError):
    """Grid refinement did not converge within the allowed iterations."""


class ConfigError(ValueError):
    """A scenario configuration failed validation.

    ``line`` is the 1-based line in the source file the problem refers to, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")
