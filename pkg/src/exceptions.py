from typing import Optional


class StructZeroError(Exception):
    """Base class for errors surfaced to the command line."""
    exit_code = 1


class InputError(StructZeroError):
    """Unreadable or invalid user input."""
    exit_code = 2


class MalformedCsvError(InputError):
    """A CSV file does not match the expected layout."""

    def __init__(self, path: str, line: int, message: str, column: Optional[str] = None):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}" + (f" (column '{column}')" if column else "")
        super().__init__(f"{where}: {message}")


class ReferenceTaxonError(InputError):
    """The requested reference taxon is missing or has a zero count."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        super().__init__(message)


class DegenerateClassError(InputError):
    """A class has too few rows to estimate its mean."""


class NumericalError(StructZeroError):
    exit_code = 3


class ConvergenceError(NumericalError):
    """An iterative routine hit its iteration cap."""

    def __init__(self, message: str, best_estimate: float):
        self.best_estimate = best_estimate
        super().__init__(f"{message} (best estimate {best_estimate:.12g})")


class NonPositiveDefiniteError(NumericalError):
    pass


class ModelSpecError(NumericalError):
    """A graph model specification does not produce a valid precision matrix."""


class InfeasibleProgramError(StructZeroError):
    """A CLIME column program has no point within the requested residual bound."""
    exit_code = 4

    def __init__(self, column: int, lambda_omega: float, min_residual: float):
        self.column = column
        self.lambda_omega = lambda_omega
        self.min_residual = min_residual
        super().__init__(
            f"Column {column}: no feasible point for lambda_omega={lambda_omega:.6g} "
            f"(smallest achievable residual {min_residual:.6g})"
        )
