"""Exception hierarchy shared by all martlab modules."""


class MartlabError(Exception):
    """Base class for every error raised by martlab."""


class DomainError(MartlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(MartlabError, ValueError):
    """Invalid configuration value (rule order, weights, tolerances, ...)."""


class EvaluationError(MartlabError, ValueError):
    """A function spec could not be evaluated at the requested points."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = tuple(points)


class PositivityError(EvaluationError):
    """A strictly positive function was required but a non-positive value was seen."""


class SpecSyntaxError(MartlabError, ValueError):
    """A function-spec string does not follow the spec grammar."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class GridLookupError(MartlabError, KeyError):
    """A requested time is not a point of the simulation grid."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NotHeatPolynomialError(MartlabError, ValueError):
    """A polynomial expected to solve the backward heat equation does not."""
