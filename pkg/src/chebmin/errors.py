"""Exception hierarchy shared by all chebmin modules."""

from __future__ import annotations


class ChebminError(Exception):
    """Base class for library errors."""


class DimensionMismatch(ChebminError, ValueError):
    """Point, polynomial or domain dimensions disagree."""


class RankDeficientError(ChebminError, ValueError):
    """The least-squares design matrix does not have full column rank."""


class NonFiniteValues(ChebminError, ValueError):
    """Oracle values contain NaN or infinity."""


class UnknownBenchmark(ChebminError, KeyError):
    """Requested benchmark name is not registered."""


class PlanInfeasible(ChebminError):
    """A parameter plan violates one of the budget inequalities.

    ``condition`` names the violated inequality (``"degree"`` or ``"samples"``).
    """

    def __init__(self, message: str, condition: str = ""):
        super().__init__(message)
        self.condition = condition


class FailNonFinite(ChebminError):
    """The critical-point system appears to have a non-isolated solution set."""


class BudgetExceeded(ChebminError):
    """Subdivision exhausted its cell budget before resolving every cell."""


class MaxRoundsExceeded(ChebminError):
    """The adaptive loop did not meet its tolerance within the allowed rounds."""


class ConfigError(ChebminError, ValueError):
    """A run configuration could not be parsed or validated."""
