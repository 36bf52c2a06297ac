"""Exception hierarchy."""


class MfreconError(Exception):
    """Base class for all package errors."""


class ParameterError(MfreconError, ValueError):
    """An argument lies outside its documented domain."""


class InvalidLevelSetError(ParameterError):
    """A level set contains its own vertex, i.e. implies a self-loop."""


class UnsupportedSizeError(MfreconError):
    """An exhaustive computation would exceed its enumeration budget."""


class RankDeficiencyError(MfreconError, ArithmeticError):
    """A dictionary matrix lacks full column rank, so coefficients are not identifiable."""
