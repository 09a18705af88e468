"""
Error taxonomy.

Three families map onto CLI exit codes:
- InputError      -> 2 (bad table, bad file, bad config)
- FlagConflict    -> 3 (invalid flag combination)
- NumericalError  -> 4 (quadrature, sample budget, enumeration budget)

Estimator undefinedness is NOT an error: it travels in-band on MeasureValue.
"""

from __future__ import annotations


class LDCanonError(Exception):
    """Base for every error raised by ldcanon."""

    exit_code = 1


# ---------------------------
# Input errors (exit 2)
# ---------------------------

class InputError(LDCanonError, ValueError):
    """Malformed or out-of-domain input."""

    exit_code = 2


class NonPositiveEntry(InputError):
    """Probability table entry is zero or negative."""

    pass


class NonPositiveScale(InputError):
    """Selection scale mu or nu is zero or negative."""

    pass


class NonPositiveLambda(InputError):
    """Odds ratio argument is zero or negative."""

    pass


class InvalidCountTable(InputError):
    """Count table has a negative cell or zero total."""

    pass


class DegenerateMarginals(InputError):
    """Count table has an empty row or column."""

    pass


class HaplotypeFormatError(InputError):
    """Haplotype TSV cannot be parsed."""

    pass


class ConfigError(InputError):
    """Study config file is invalid."""

    pass


class CalibrationFileError(InputError):
    """Calibration file header or knots are invalid."""

    pass


# ---------------------------
# Flag conflicts (exit 3)
# ---------------------------

class FlagConflict(LDCanonError):
    """Flags are individually valid but cannot be combined."""

    exit_code = 3


# ---------------------------
# Numerical failures (exit 4)
# ---------------------------

class NumericalError(LDCanonError, ArithmeticError):
    """A numerical procedure could not deliver the requested accuracy."""

    exit_code = 4


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not reach tolerance within its budget."""

    pass


class InsufficientSamples(NumericalError):
    """Monte Carlo sample count below the minimum."""

    pass


class BudgetExceeded(NumericalError):
    """Volume enumeration requested above the N cap."""

    pass


class EmptyBin(NumericalError):
    """A marginal-frequency bin received too few tables."""

    pass


class OutputValidationError(LDCanonError):
    """A record failed its output schema; nothing was written."""

    pass


# ---------------------------
# Interruption
# ---------------------------

class StudyInterrupted(LDCanonError):
    """A study stopped early; `partial` holds the report over completed replicates."""

    exit_code = 130

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
