class DomainError(ValueError):
    """Input outside an operation's domain (bad grid, NaN field, shape outside the box...)."""


class FormatError(ValueError):
    """Malformed file contents."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FitDiverged(RuntimeError):
    """Raised when the descent blows up; carries the last finite field."""

    def __init__(self, message, last_good, report):
        super().__init__(message)
        self.last_good = last_good
        self.report = report
