import logging
from typing import Optional, Tuple

import numpy as np

from ..config import l0_tolerance
from ..exceptions import ConvergenceError, NumericalError
from ..models import NormReport

logger = logging.getLogger(__name__)

# Dense symmetric eigensolves are used up to this dimension.
DENSE_EIGEN_CUTOFF = 64


def _require_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.allclose(arr, arr.T, rtol=0.0, atol=1e-10 * max(1.0, float(np.abs(arr).max(initial=0.0)))):
        raise ValueError(f"{name} must be symmetric")
    return arr


def norms(a: np.ndarray, tol: Optional[float] = None) -> NormReport:
    """Computes the l0, l1, sup, spectral and Frobenius norms of a matrix.

    Args:
        a: Any finite l x m matrix.
        tol: Entries with absolute value at or below this count as zero for l0.
            Defaults to the configured STRUCTZERO_L0_TOLERANCE.
    """
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise ValueError("norms requires finite entries")
    tol = l0_tolerance() if tol is None else tol
    absolute = np.abs(arr)
    return NormReport(
        l0=int(np.count_nonzero(absolute > tol)),
        l1=float(absolute.sum()),
        sup=float(absolute.max(initial=0.0)),
        spectral=float(np.linalg.norm(arr, 2)) if arr.size else 0.0,
        frobenius=float(np.sqrt(np.sum(arr * arr))),
    )


def spectral_norm(a: np.ndarray, tol: float = 1e-9, max_iter: int = 20000,
                  dense_cutoff: int = DENSE_EIGEN_CUTOFF) -> float:
    """Largest absolute eigenvalue of a symmetric matrix.

    Small matrices use a dense symmetric eigensolve. Larger ones run power
    iteration on A^2, whose dominant eigenvalue is ||A||_2^2, stopping when the
    relative change of the estimate drops below `tol`.
    """
    arr = _require_symmetric(a)
    d = arr.shape[0]
    if d == 0:
        return 0.0
    if d <= dense_cutoff:
        return float(np.max(np.abs(np.linalg.eigvalsh(arr))))

    rng = np.random.default_rng(0)
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    estimate = 0.0
    for iteration in range(max_iter):
        y = arr @ (arr @ x)
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            return 0.0
        new_estimate = float(np.sqrt(x @ y))
        x = y / y_norm
        if iteration > 0 and abs(new_estimate - estimate) <= tol * max(new_estimate, np.finfo(float).tiny):
            return new_estimate
        estimate = new_estimate
    raise ConvergenceError(f"Power iteration did not converge in {max_iter} iterations", estimate)


def min_eigenvalue(a: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    arr = _require_symmetric(a)
    try:
        return float(np.linalg.eigvalsh(arr)[0])
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Symmetric eigensolve failed: {e}") from e


def sparsity_class_stats(a: np.ndarray, q: float) -> Tuple[float, float]:
    """Returns (max_i sum_j |a_ij|^q, max_i a_ii), with 0^0 taken as 0."""
    if not 0.0 <= q < 1.0:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    arr = np.asarray(a, dtype=float)
    absolute = np.abs(arr)
    powered = np.where(absolute > 0.0, absolute ** q, 0.0)
    return float(powered.sum(axis=1).max(initial=0.0)), float(np.diag(arr).max(initial=0.0))
