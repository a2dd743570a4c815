"""Exception types raised by the beamforming library."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ValueError):
    """A scenario configuration failed validation."""


class NumericalError(RuntimeError):
    """A numerical routine produced an unusable result."""


class ExtractionError(NumericalError):
    """Rank-one extraction broke one of its guaranteed properties."""

    def __init__(self, clause, detail):
        super().__init__(f"{clause}: {detail}")
        self.clause = clause
        self.detail = detail


class DegenerateExtractionError(NumericalError):
    """The relaxed information covariance carries no power towards the CU."""


class InfeasibleError(RuntimeError):
    """The requested secrecy rate cannot be met.

    ``r_star`` holds the maximum achievable secrecy rate when it is known.
    """

    def __init__(self, message, r_star=None):
        super().__init__(message)
        self.r_star = r_star


class SearchRangeError(InfeasibleError):
    """Every point of the outer search grid was infeasible."""
