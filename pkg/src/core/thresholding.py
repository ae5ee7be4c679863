import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..models import CovarianceEstimate, OperatorCheck, OperatorViolation, ThresholdOperator

logger = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray, float], np.ndarray]


def _check_lambda(lam: float) -> None:
    if lam < 0:
        raise ValueError(f"threshold must be non-negative, got {lam}")


def _like_input(x, result: np.ndarray):
    return float(result) if np.ndim(x) == 0 else result


def soft_threshold(x, lam: float):
    """sign(x) * max(|x| - lam, 0), element-wise."""
    _check_lambda(lam)
    arr = np.asarray(x, dtype=float)
    return _like_input(x, np.sign(arr) * np.maximum(np.abs(arr) - lam, 0.0))


def hard_threshold(x, lam: float):
    """x where |x| > lam, else 0, element-wise."""
    _check_lambda(lam)
    arr = np.asarray(x, dtype=float)
    return _like_input(x, np.where(np.abs(arr) > lam, arr, 0.0))


OPERATORS = {
    "soft": soft_threshold,
    "hard": hard_threshold,
}


def apply_threshold(sigma: CovarianceEstimate, op: ThresholdOperator) -> CovarianceEstimate:
    """Maps every entry of the estimate through the scalar operator.

    The diagonal is thresholded too unless the operator says otherwise.
    """
    thresholded = OPERATORS[op.kind](sigma.sigma, op.lam)
    if not op.include_diagonal:
        np.fill_diagonal(thresholded, np.diag(sigma.sigma))
    return sigma.model_copy(update={"sigma": thresholded, "threshold": op})


def default_lambda_grid(sigma: np.ndarray, num: int = 50, ratio: float = 1e-3) -> list:
    """num log-spaced thresholds from ||sigma||_inf down to ||sigma||_inf * ratio, ascending."""
    top = float(np.abs(sigma).max(initial=0.0))
    if top <= 0.0:
        top = 1.0
    return np.geomspace(top * ratio, top, num).tolist()


def validate_operator(op: Union[ThresholdOperator, ScalarMap], points: Sequence[float],
                      lam: Optional[float] = None, rtol: float = 1e-12) -> OperatorCheck:
    """Checks the generalized-thresholding contract at every given point.

    The three conditions are |s(x)| <= |x| (shrinkage), s(x) = 0 for |x| <= lam
    (zeroing) and |s(x) - x| <= lam (proximity). `op` is either a
    ThresholdOperator or any callable (x, lam) -> s(x), in which case `lam`
    must be given. The first violating point is reported.
    """
    if isinstance(op, ThresholdOperator):
        scalar_map: ScalarMap = OPERATORS[op.kind]
        lam = op.lam
    else:
        if lam is None:
            raise ValueError("lam is required when validating a bare callable")
        scalar_map = op
    x = np.asarray(points, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("point set must not be empty")

    s = np.asarray(scalar_map(x, lam), dtype=float)
    slack = rtol * np.maximum(1.0, np.abs(x))
    failures = {
        "shrinkage": np.abs(s) > np.abs(x) + slack,
        "zeroing": (np.abs(x) <= lam) & (s != 0.0),
        "proximity": np.abs(s - x) > lam + slack,
    }
    bad = np.flatnonzero(np.logical_or.reduce(list(failures.values())))
    if bad.size == 0:
        return OperatorCheck(passed=True, points_checked=int(x.size))

    first = int(bad[0])
    condition = next(name for name, hit in failures.items() if hit[first])
    logger.debug(f"Operator contract violated ({condition}) at x={x[first]:.6g}")
    return OperatorCheck(
        passed=False,
        points_checked=int(x.size),
        violation=OperatorViolation(condition=condition, x=float(x[first]), value=float(s[first]), lam=lam),
    )
