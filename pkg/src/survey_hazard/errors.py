"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    The last iterate and solver diagnostics are attached so callers can
    inspect or resume.
    """

    def __init__(self, message, intercept=None, coef=None, diagnostics=None):
        super().__init__(message)
        self.intercept = intercept
        self.coef = coef
        self.diagnostics = diagnostics or {}
