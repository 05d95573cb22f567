"""Exception hierarchy shared across the package."""


class QReduceError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QReduceError):
    """An input object violates a structural precondition (e.g. non-Hermitian matrix)."""


class DomainError(QReduceError):
    """An input value lies outside the mathematical domain of an operation."""


class ChartDomainError(DomainError):
    """A projective point lies outside the requested affine chart."""

    def __init__(self, chart_index: int, magnitude: float):
        self.chart_index = chart_index
        self.magnitude = magnitude
        super().__init__(
            f"coordinate {chart_index} has magnitude {magnitude:.3e}; "
            f"point is outside the chart z_{chart_index} != 0"
        )


class ConfigurationError(ValidationError):
    """A simulation configuration is unusable (e.g. stability guard violated)."""


class IntegrationFailureError(QReduceError):
    """The state became non-finite during integration.

    Carries the last valid trajectory record in ``last_record``.
    """

    def __init__(self, message, last_record=None):
        super().__init__(message)
        self.last_record = last_record


class InsufficientDataError(QReduceError):
    """A statistical estimate has no usable data (e.g. zero regressor)."""


class EnsembleFailureError(QReduceError):
    """Too many trajectories failed for the ensemble statistics to be meaningful."""
