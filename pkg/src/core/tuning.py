import logging
from typing import List, Tuple

import numpy as np
from sklearn.model_selection import KFold

from ..exceptions import InfeasibleProgramError
from ..models import CovarianceEstimate, CvConfig, CvResult, MaskedDataset, ThresholdOperator
from .clime import default_lambda_omega_grid, estimate_precision
from .estimator import covariance_for
from .thresholding import apply_threshold, default_lambda_grid

logger = logging.getLogger(__name__)


def fold_indices(n: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffled K-fold partition of range(n) into (train, validation) index pairs."""
    if folds > n:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    return [(train, val) for train, val in splitter.split(np.arange(n))]


def _fold_estimates(data: MaskedDataset, cfg: CvConfig,
                    method: str) -> List[Tuple[CovarianceEstimate, CovarianceEstimate]]:
    estimates = []
    for train, val in fold_indices(data.n, cfg.folds, cfg.seed):
        estimates.append((covariance_for(data.take(rows=train), method),
                          covariance_for(data.take(rows=val), method)))
    return estimates


def _select(penalties: List[float], fold_losses: np.ndarray, loss_kind: str) -> CvResult:
    mean_losses = fold_losses.mean(axis=0)
    # argmin returns the first minimiser, i.e. the smallest penalty on ties
    best = int(np.argmin(mean_losses))
    return CvResult(
        penalties=list(penalties),
        mean_losses=mean_losses.tolist(),
        fold_losses=fold_losses.tolist(),
        selected=float(penalties[best]),
        loss_kind=loss_kind,
    )


def cv_covariance(data: MaskedDataset, op_kind: str, cfg: CvConfig,
                  method: str = "renormalized", include_diagonal: bool = True) -> CvResult:
    """Chooses the threshold by K-fold cross-validation.

    For each fold the training estimate is thresholded and compared with the
    raw validation estimate in Frobenius norm; the threshold with the smallest
    mean loss wins.
    """
    grid = cfg.grid or default_lambda_grid(covariance_for(data, method).sigma)
    folds = _fold_estimates(data, cfg, method)
    losses = np.empty((len(folds), len(grid)))
    for f, (train, val) in enumerate(folds):
        for g, lam in enumerate(grid):
            op = ThresholdOperator(kind=op_kind, lam=lam, include_diagonal=include_diagonal)
            losses[f, g] = np.linalg.norm(apply_threshold(train, op).sigma - val.sigma, "fro")
    result = _select(grid, losses, "cov_frobenius")
    logger.info(f"cv_covariance ({method}, {op_kind}): selected lambda={result.selected:.4g} "
                f"from {len(grid)} candidates over {cfg.folds} folds")
    return result


def precision_loss(sigma_val: np.ndarray, omega: np.ndarray, loss_kind: str) -> float:
    """Tr[(S Omega - I)^T (S Omega - I)], or (Tr[S Omega - I])^2 for prec_squared_trace."""
    residual = sigma_val @ omega - np.eye(omega.shape[0])
    if loss_kind == "prec_squared_trace":
        return float(np.trace(residual) ** 2)
    return float(np.sum(residual * residual))


def cv_precision(data: MaskedDataset, cfg: CvConfig, method: str = "renormalized",
                 threads: int = 1) -> CvResult:
    """Chooses lambda_omega by K-fold cross-validation of the CLIME estimate.

    Grid points whose program is infeasible on some fold get an infinite loss.
    The feasible set only shrinks as lambda_omega decreases, so each fold walks
    the grid from the largest penalty down and stops at the first infeasible one.
    """
    loss_kind = cfg.loss_kind if cfg.loss_kind != "cov_frobenius" else "prec_trace"
    grid = cfg.grid or default_lambda_omega_grid()
    folds = _fold_estimates(data, cfg, method)
    losses = np.full((len(folds), len(grid)), np.inf)
    for f, (train, val) in enumerate(folds):
        for g in reversed(range(len(grid))):
            lam = grid[g]
            try:
                omega = estimate_precision(train, lam, threads=threads, diagnose=False).omega
            except InfeasibleProgramError as e:
                logger.warning(f"cv_precision: fold {f}, lambda_omega={lam:.4g} infeasible at column {e.column}; "
                               f"{g} smaller candidates skipped")
                break
            losses[f, g] = precision_loss(val.sigma, omega, loss_kind)
    if not np.isfinite(losses.mean(axis=0)).any():
        raise InfeasibleProgramError(-1, float(grid[-1]), float("nan"))
    result = _select(grid, losses, loss_kind)
    logger.info(f"cv_precision ({method}): selected lambda_omega={result.selected:.4g} "
                f"from {len(grid)} candidates over {cfg.folds} folds")
    return result
