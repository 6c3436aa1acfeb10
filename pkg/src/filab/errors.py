"""Exception hierarchy shared by every module."""


class FilabError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(FilabError, ValueError):
    pass


class InvalidIndexError(FilabError, IndexError):
    pass


class InvariantViolationError(FilabError, ValueError):
    pass


class InvalidInputError(FilabError, ValueError):
    pass


class InvalidConfigError(FilabError, ValueError):
    pass


class ResourceLimitError(FilabError):
    pass


class SolverError(FilabError, RuntimeError):
    pass


class ConditionalUndefinedError(FilabError, ValueError):
    pass
