"""Exception types shared across the package."""


class GuesscorrError(Exception):
    """Base class for package-specific errors."""


class InputFormatError(GuesscorrError):
    """An input file or value cannot be parsed or fails validation."""


class UndefinedStatisticError(GuesscorrError):
    """A statistic has no defined value (constant vector, empty class, ...)."""


class PruningRequiredError(GuesscorrError):
    """An operation needs a pruned matrix but got one with removable rows/columns."""


class UnsupportedModelError(GuesscorrError):
    """A model is excluded from this operation by policy."""
