"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative routine exhausts its iteration budget.

    The last available estimate is kept on ``estimate`` so callers can
    decide whether it is good enough for their purposes.
    """

    def __init__(self, message, estimate=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


class ParseError(ValidationError):
    """Malformed rating file; ``line`` holds the 1-based line number."""

    def __init__(self, message, path=None, line=None):
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line


class TrainingError(RuntimeError):
    """Training produced a non-finite loss; ``diagnostics`` says where."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
