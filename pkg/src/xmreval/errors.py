"""Exception types shared across the toolkit."""

from __future__ import annotations


class InputError(ValueError):
    """Malformed or inconsistent input data.

    ``path`` and ``line`` are filled in by file loaders so that the CLI can
    point at the offending location.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        msg = super().__str__()
        if self.path is not None and self.line is not None:
            return f"{self.path}:{self.line}: {msg}"
        if self.path is not None:
            return f"{self.path}: {msg}"
        return msg


class BundleError(InputError):
    """Schema or invariant violation in an annotation bundle."""

    def __init__(self, message: str, index: int | None = None, path: str | None = None):
        self.index = index
        if index is not None:
            message = f"record {index}: {message}"
        super().__init__(message, path=path)


class NumericError(RuntimeError):
    """A computation could not produce a defined value."""


class ConvergenceError(NumericError):
    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
