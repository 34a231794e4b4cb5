"""Exception types raised across the package."""


class SquintlabError(Exception):
    """Base class for package errors."""


class ConfigurationError(SquintlabError, ValueError):
    """Invalid scenario, array, or algorithm configuration."""


class LayoutError(SquintlabError, ValueError):
    """A layout violates containment or spacing constraints.

    The structured report is available as ``report``.
    """

    def __init__(self, report):
        super().__init__(f"invalid layout: {report.summary()}")
        self.report = report


class InfeasibleBoxError(SquintlabError, ValueError):
    """A tile cannot fit inside its panel at any translation."""


class SingularityError(SquintlabError, ArithmeticError):
    """A user coincides with an array element (zero path length)."""


class SubproblemError(SquintlabError, RuntimeError):
    """The per-tile convex subproblem has an empty feasible region."""
