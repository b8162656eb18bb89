"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front-end can map
failures without inspecting messages: 1 for usage/config problems, 2 for
data problems, 3 for numerical non-convergence.
"""


class P2PBandwidthError(Exception):
    exit_code = 2


class InvalidArgument(P2PBandwidthError, ValueError):
    exit_code = 1


class ConfigError(InvalidArgument):
    exit_code = 1


class UnstableQueue(InvalidArgument):
    """Service margin is not positive (m >= 1 or utilization >= 1)."""

    exit_code = 1


class DataError(P2PBandwidthError, ValueError):
    exit_code = 2


class EstimationDegenerate(DataError):
    """The trace carries no information about the parameter (e.g. all zeros)."""


class DivergentEstimate(DataError):
    """Closed-form estimator hits a division by zero."""


class InsufficientData(DataError):
    pass


class FitFailed(P2PBandwidthError, RuntimeError):
    """Iterative fit did not converge; the best iterate is attached."""

    exit_code = 3

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
