"""
Exception hierarchy for the DP-GD lab.

Configuration problems derive from ConfigError (CLI exit code 2), numerical
failures derive from NumericalError (CLI exit code 3).
"""
from typing import Optional


class DPGDError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DPGDError, ValueError):
    """Invalid user input or configuration."""


class NumericalError(DPGDError, ArithmeticError):
    """A computation could not produce a meaningful number."""


# --- Configuration family ---

class DomainError(ConfigError):
    """An argument lies outside the domain of the function."""


class InvalidExponentError(ConfigError):
    """Power-law exponent phi must be < 1."""


class AlignmentExponentError(ConfigError):
    """Alignment exponent psi must be < 1 - phi."""


class OutOfTheoryError(ConfigError):
    """Parameters outside the admissible ranges of the scaling law."""


class ComputeBudgetError(ConfigError):
    """The estimated work exceeds the configured compute budget."""


class IngestionError(ConfigError):
    """A dataset could not be read."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


# --- Numerical family ---

class DegenerateRiskError(NumericalError):
    """Clipping factors are undefined for zero total risk."""


class NegativeVarianceError(NumericalError):
    """The learning-rate schedule increases somewhere, so a noise variance is negative."""


class InfinitePrivacyLossError(NumericalError):
    """Some sample is not protected by any subsequent noise."""


class OdeInstabilityError(NumericalError):
    """The fixed-step integrator drove a mode energy negative."""


class DivergenceError(NumericalError):
    """An iterate of DP-GD became non-finite."""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} at step {step}")


class OptimizationFailedError(NumericalError):
    """Every candidate of a hyper-parameter search diverged."""


class FitError(NumericalError):
    """A log-log fit received non-positive values."""
