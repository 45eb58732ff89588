"""Exception types shared across the package."""


class SgpBenchError(Exception):
    """Base class for all package-specific errors."""


class PositiveDefiniteFailure(SgpBenchError):
    """A matrix could not be Cholesky-factorized even at the largest jitter."""


class NonFiniteObjective(SgpBenchError):
    """An objective or gradient evaluation produced NaN/Inf.

    Optimizers treat this as a restart trigger rather than a fatal error.
    """


class InvalidStart(SgpBenchError):
    """The optimizer was given a starting point with a non-finite objective."""


class TrainingFailure(SgpBenchError):
    """A training run could not produce a finite objective at all."""


class PackDomainError(SgpBenchError):
    """A constrained hyperparameter is at or below its feasible lower bound."""


class InternalConsistencyError(SgpBenchError):
    """A quantity that must be non-negative came out negative beyond rounding."""


class ParseError(SgpBenchError):
    """A data file row could not be parsed. Carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


class EmptyDataset(SgpBenchError):
    """No usable rows remained after parsing."""


class NonNumericColumn(SgpBenchError):
    """A column selected for modelling contains non-numeric entries."""


class UnknownGenerator(SgpBenchError):
    """Requested toy-data generator name is not recognised."""


class LengthMismatch(SgpBenchError):
    """Paired arrays have different lengths."""


class NonPositiveVariance(SgpBenchError):
    """A predictive variance required to be positive is zero or negative."""
