import logging
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import List

import numpy as np
from scipy.optimize import linprog

from ..config import feasibility_slack, lp_tolerance
from ..exceptions import InfeasibleProgramError, NumericalError
from ..models import ColumnProgram, ColumnSolution, CovarianceEstimate, PrecisionEstimate

logger = logging.getLogger(__name__)

# HiGHS linprog status codes
LP_OPTIMAL = 0
LP_INFEASIBLE = 2


def _solver_options() -> dict:
    tol = lp_tolerance()
    return {
        "primal_feasibility_tolerance": tol,
        "dual_feasibility_tolerance": tol,
        "presolve": True,
    }


def _minimal_residual(sigma_hat: np.ndarray, j: int) -> float:
    """Smallest achievable ||S b - e_j||_inf over all b (Chebyshev fit)."""
    d = sigma_hat.shape[0]
    e_j = np.zeros(d)
    e_j[j] = 1.0
    ones = np.ones((d, 1))
    # variables (b, t): minimise t subject to -t <= S b - e_j <= t
    c = np.concatenate([np.zeros(d), [1.0]])
    a_ub = np.vstack([np.hstack([sigma_hat, -ones]), np.hstack([-sigma_hat, -ones])])
    b_ub = np.concatenate([e_j, -e_j])
    bounds = [(None, None)] * d + [(0, None)]
    result = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs-ds", options=_solver_options())
    return float(result.fun) if result.status == LP_OPTIMAL else float("nan")


def solve_column(prog: ColumnProgram, diagnose: bool = True) -> ColumnSolution:
    """Solves min ||b||_1 subject to ||S b - e_j||_inf <= lambda as a linear program.

    b is split into positive and negative parts (u, v >= 0, b = u - v), giving
    2d variables and 2d inequality rows. The dual simplex keeps pivoting
    deterministic.

    Args:
        prog: The column program.
        diagnose: Solve the extra Chebyshev program on infeasibility so the
            error carries the smallest achievable residual (NaN otherwise).

    Raises:
        InfeasibleProgramError: No b meets the bound.
    """
    s = prog.sigma_hat
    d = s.shape[0]
    j = prog.target_index
    lam = prog.lambda_omega
    e_j = np.zeros(d)
    e_j[j] = 1.0

    c = np.ones(2 * d)
    a_ub = np.vstack([np.hstack([s, -s]), np.hstack([-s, s])])
    b_ub = np.concatenate([lam + e_j, lam - e_j])
    result = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs-ds", options=_solver_options())

    if result.status == LP_INFEASIBLE:
        raise InfeasibleProgramError(j, lam, _minimal_residual(s, j) if diagnose else float("nan"))
    if result.status != LP_OPTIMAL:
        raise NumericalError(f"Column {j}: linear program failed (status {result.status}): {result.message}")

    beta = result.x[:d] - result.x[d:]
    residual = float(np.max(np.abs(s @ beta - e_j)))
    if residual > lam + feasibility_slack():
        raise InfeasibleProgramError(j, lam, residual)
    return ColumnSolution(
        beta=beta,
        residual=residual,
        objective=float(np.abs(beta).sum()),
        iterations=int(getattr(result, "nit", 0) or 0),
    )


def symmetrize(omega1: np.ndarray) -> np.ndarray:
    """Keeps, for each mirror pair, the entry of smaller absolute value.

    Ties keep the upper-triangle entry omega1[i][j] (i < j).
    """
    a = np.asarray(omega1, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"symmetrize needs a square matrix, got shape {a.shape}")
    upper = np.triu(a, 1)
    lower_t = np.triu(a.T, 1)
    chosen = np.where(np.abs(upper) <= np.abs(lower_t), upper, lower_t)
    return chosen + chosen.T + np.diag(np.diag(a))


def estimate_precision(sigma: CovarianceEstimate, lambda_omega: float, threads: int = 1,
                       diagnose: bool = True) -> PrecisionEstimate:
    """Solves every column program, assembles Omega_1 and symmetrizes it.

    Raises:
        InfeasibleProgramError: With the index of the first infeasible column.
    """
    if lambda_omega < 0:
        raise ValueError(f"lambda_omega must be non-negative, got {lambda_omega}")
    s = sigma.sigma
    d = s.shape[0]
    programs = [ColumnProgram(sigma_hat=s, target_index=j, lambda_omega=lambda_omega) for j in range(d)]

    solve = partial(solve_column, diagnose=diagnose)
    if threads > 1 and d > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solutions: List[ColumnSolution] = list(pool.map(solve, programs))
    else:
        solutions = [solve(p) for p in programs]

    omega1 = np.column_stack([sol.beta for sol in solutions])
    gap = float(np.max(np.abs(s @ omega1 - np.eye(d)))) if d else 0.0
    logger.debug(f"estimate_precision: d={d}, lambda_omega={lambda_omega:.4g}, feasibility gap {gap:.3g}")
    return PrecisionEstimate(
        omega=symmetrize(omega1),
        lambda_omega=lambda_omega,
        feasibility_gap=gap,
        iterations=[sol.iterations for sol in solutions],
        component_names=sigma.component_names,
    )


def default_lambda_omega_grid(num: int = 20, low: float = 1e-3, high: float = 1.0) -> list:
    return np.geomspace(low, high, num).tolist()
