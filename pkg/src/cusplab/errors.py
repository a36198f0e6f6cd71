"""Exception types shared across the package."""


class CuspLabError(Exception):
    """Base class for all cusplab failures."""


class DomainError(CuspLabError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class InvalidIntervalError(DomainError):
    """Quadrature interval with a >= b."""


class SeriesTruncationError(CuspLabError):
    """A series could not be certified to the requested tolerance.

    Attributes:
        achieved: the best certified relative tail bound reached.
        terms: number of terms summed before giving up.
    """

    def __init__(self, message, achieved=None, terms=None):
        super().__init__(message)
        self.achieved = achieved
        self.terms = terms


class QuadratureError(CuspLabError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class CurvatureError(CuspLabError):
    """Curvature positivity (the polarization condition) fails on the grid.

    Attributes s and theta locate the offending point.
    """

    def __init__(self, message, s=None, theta=None):
        super().__init__(message)
        self.s = s
        self.theta = theta


class MatchingError(CuspLabError):
    """Bridge gluing does not meet the C^2 matching residual requirement."""


class DegenerateDimensionError(DomainError):
    """The space of admissible sections is empty at this tensor power."""


class RankDeficiencyError(CuspLabError):
    """Projected head sections are numerically dependent (head count too large)."""


class EmptyScheduleError(CuspLabError):
    """The refined truncation schedule is empty at this tensor power.

    Attribute minimal_p reports the smallest p for which the schedule
    admits the requested head index.
    """

    def __init__(self, message, minimal_p=None):
        super().__init__(message)
        self.minimal_p = minimal_p


class DifferentiationInstabilityError(CuspLabError):
    """Analytic series derivative and finite differences disagree."""


class RootPolishError(CuspLabError):
    """Root polishing failed to reach the residual target for a sample."""
