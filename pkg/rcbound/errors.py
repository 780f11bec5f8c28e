"""Exceptions raised by rcbound.

Every error derives from :class:`RcBoundError`, itself a `ValueError`, so callers
can catch input problems generically or a specific condition by name.
"""


class RcBoundError(ValueError):
    """Base class of all rcbound errors."""


# channel ingestion and support sets


class ChannelValidationError(RcBoundError):
    """Raised when a raw matrix or probability vector cannot be ingested."""


class NegativeEntryError(ChannelValidationError):
    pass


class RowSumOutOfToleranceError(ChannelValidationError):
    pass


class EmptyAlphabetError(ChannelValidationError):
    pass


class DimensionMismatchError(RcBoundError):
    pass


class EmptyMaximizerListError(RcBoundError):
    pass


class EmptySupportError(RcBoundError):
    pass


# exponents


class RateOutOfOpenIntervalError(RcBoundError):
    """Raised when a rate is not strictly inside the open rate interval an operation requires."""


class DegenerateChannelError(RcBoundError):
    """Raised when E_o is linear in rho, so that R_cr(Q) = I(Q;W)."""


class OptimizerDidNotConvergeError(RcBoundError):
    pass


class NoMaximizerFoundError(RcBoundError):
    pass


# bounds


class NotSingularError(RcBoundError):
    pass


class NotNonsingularError(RcBoundError):
    pass


class EsseenConstantNonpositiveError(RcBoundError):
    pass


class QNotEoOptimalError(RcBoundError):
    pass


class RateAboveCriticalError(RcBoundError):
    pass


# concentration


class ZeroVarianceError(RcBoundError):
    pass


class ThresholdOutOfRangeError(RcBoundError):
    pass


class SupportExplosionError(RcBoundError):
    pass


class SingularCovarianceError(RcBoundError):
    pass


class NotCenteredError(RcBoundError):
    pass


# ensemble oracle


class TooManyTypesError(RcBoundError):
    pass


class CapExceededError(RcBoundError):
    pass


class BudgetExceededError(RcBoundError):
    pass


class InsufficientPointsError(RcBoundError):
    pass


class TieToleranceConflictError(RcBoundError):
    """Raised when a pairwise log-likelihood ratio is nonzero but within the tie tolerance of 0."""


# command line


class UnknownSubcommandError(RcBoundError):
    pass


class ConfigParseError(RcBoundError):
    pass


class InvalidLawError(RcBoundError):
    """Raised when atoms and probabilities do not describe a probability law."""
