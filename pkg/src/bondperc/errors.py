"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class CapacityError(RuntimeError):
    """An enumeration or allocation guard was exceeded."""


class ClusterFormatError(DomainError):
    """A cluster file could not be parsed.

    ``line`` is the 1-based line number of the offending line, or ``None``
    when the problem concerns the file as a whole.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
