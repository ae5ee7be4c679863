import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from src.core.clime import default_lambda_omega_grid, estimate_precision, solve_column, symmetrize
from src.core.mask_model import pairwise_counts
from src.core.simgen import gen_precision
from src.exceptions import InfeasibleProgramError
from src.models import ColumnProgram, CovarianceEstimate, GraphModelSpec, ObservationMask


def as_estimate(sigma):
    sigma = np.asarray(sigma, dtype=float)
    counts = pairwise_counts(ObservationMask(entries=np.ones((2, sigma.shape[0]))))
    return CovarianceEstimate(sigma=sigma, counts=counts)


def test_identity_column_without_slack():
    solution = solve_column(ColumnProgram(sigma_hat=np.eye(3), target_index=0, lambda_omega=0.0))
    np.testing.assert_allclose(solution.beta, [1.0, 0.0, 0.0], atol=1e-9)


def test_identity_column_with_slack():
    solution = solve_column(ColumnProgram(sigma_hat=np.eye(2), target_index=0, lambda_omega=0.3))
    np.testing.assert_allclose(solution.beta, [0.7, 0.0], atol=1e-9)
    assert solution.objective == pytest.approx(0.7)
    assert solution.residual <= 0.3 + 1e-8


def test_diagonal_inversion():
    estimate = estimate_precision(as_estimate(np.diag([2.0, 4.0])), 0.0)
    np.testing.assert_allclose(estimate.omega, np.diag([0.5, 0.25]), atol=1e-9)


@pytest.mark.parametrize("lam", [0.0, 0.25, 0.6, 0.95])
def test_identity_shrinks_uniformly(lam):
    estimate = estimate_precision(as_estimate(np.eye(4)), lam)
    np.testing.assert_allclose(estimate.omega, (1 - lam) * np.eye(4), atol=1e-9)


def test_large_penalty_returns_zero():
    estimate = estimate_precision(as_estimate(np.eye(3)), 1.5)
    np.testing.assert_allclose(estimate.omega, 0.0, atol=1e-12)


def test_singular_sigma_with_zero_penalty_is_infeasible():
    with pytest.raises(InfeasibleProgramError) as info:
        solve_column(ColumnProgram(sigma_hat=np.ones((2, 2)), target_index=0, lambda_omega=0.0))
    assert info.value.column == 0
    assert info.value.min_residual == pytest.approx(0.5, abs=1e-6)


def test_matches_alternative_formulation(rng):
    # min sum(t) s.t. -t <= b <= t, |S b - e_j| <= lam
    for _ in range(10):
        d = 4
        a = rng.standard_normal((d, d))
        s = a @ a.T / d + np.eye(d)
        lam = 0.1
        j = int(rng.integers(d))
        e_j = np.eye(d)[j]
        c = np.concatenate([np.zeros(d), np.ones(d)])
        eye = np.eye(d)
        zeros = np.zeros((d, d))
        a_ub = np.vstack([
            np.hstack([eye, -eye]), np.hstack([-eye, -eye]),
            np.hstack([s, zeros]), np.hstack([-s, zeros]),
        ])
        b_ub = np.concatenate([np.zeros(2 * d), lam + e_j, lam - e_j])
        oracle = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * d + [(0, None)] * d, method="highs")
        solution = solve_column(ColumnProgram(sigma_hat=s, target_index=j, lambda_omega=lam))
        assert solution.objective == pytest.approx(oracle.fun, rel=1e-7, abs=1e-9)


def test_optimum_beats_coarse_lattice():
    s = np.array([[1.0, 0.4], [0.4, 1.0]])
    lam = 0.2
    solution = solve_column(ColumnProgram(sigma_hat=s, target_index=0, lambda_omega=lam))
    lattice = np.linspace(-2, 2, 201)
    for b in itertools.product(lattice, repeat=2):
        b = np.array(b)
        if np.max(np.abs(s @ b - [1.0, 0.0])) <= lam:
            assert solution.objective <= np.abs(b).sum() + 1e-9


def test_symmetrize_keeps_smaller_entry():
    omega1 = np.array([[1.0, 0.5], [-0.3, 2.0]])
    np.testing.assert_allclose(symmetrize(omega1), [[1.0, -0.3], [-0.3, 2.0]])


def test_symmetrize_tie_keeps_upper_entry():
    omega1 = np.array([[1.0, -0.4], [0.4, 1.0]])
    np.testing.assert_allclose(symmetrize(omega1), [[1.0, -0.4], [-0.4, 1.0]])


def test_symmetrize_random_matrices(rng):
    for _ in range(10000 // 100):
        a = rng.standard_normal((10, 10))
        out = symmetrize(a)
        np.testing.assert_array_equal(out, out.T)
        upper = np.triu_indices(10, 1)
        chosen = out[upper]
        assert np.all((chosen == a[upper]) | (chosen == a.T[upper]))
        assert np.all(np.abs(chosen) <= np.minimum(np.abs(a[upper]), np.abs(a.T[upper])))


def test_symmetric_input_unchanged(rng):
    a = rng.standard_normal((5, 5))
    a = a + a.T
    np.testing.assert_array_equal(symmetrize(a), a)


def test_band_model_support_recovered():
    model = gen_precision(GraphModelSpec(kind="band", d=25))
    estimate = estimate_precision(as_estimate(model.sigma), 0.01, threads=2)
    support = np.abs(estimate.omega) > 1e-6
    assert support[model.adjacency.astype(bool)].mean() > 0.9
    assert estimate.feasibility_gap <= 0.01 + 1e-7
    assert len(estimate.iterations) == 25


def test_threads_do_not_change_result(rng):
    a = rng.standard_normal((6, 6))
    s = as_estimate(a @ a.T / 6 + np.eye(6))
    np.testing.assert_array_equal(estimate_precision(s, 0.05, threads=1).omega,
                                  estimate_precision(s, 0.05, threads=3).omega)


def test_default_grid():
    grid = default_lambda_omega_grid()
    assert grid == sorted(grid)
    assert grid[0] == pytest.approx(1e-3) and grid[-1] == pytest.approx(1.0)


def vertex_oracle(s, j, lam):
    """Exact min ||b||_1 over the feasible set for small d.

    On each sign orthant the objective is linear, so the optimum sits where d
    of the hyperplanes b_i = 0, (S b)_k = e_jk +/- lam meet.
    """
    d = s.shape[0]
    e_j = np.eye(d)[j]
    rows = [(np.eye(d)[i], 0.0) for i in range(d)]
    rows += [(s[k], e_j[k] + sign * lam) for k in range(d) for sign in (1.0, -1.0)]
    best = np.inf
    for combo in itertools.combinations(rows, d):
        a = np.array([r for r, _ in combo])
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        b = np.linalg.solve(a, np.array([v for _, v in combo]))
        if np.max(np.abs(s @ b - e_j)) <= lam + 1e-10:
            best = min(best, np.abs(b).sum())
    return best


def test_random_three_by_three_programs_match_exact_oracle(rng):
    lattice = np.linspace(-3.0, 3.0, 61)
    points = np.array(list(itertools.product(lattice, repeat=3)))
    for _ in range(20):
        a = rng.standard_normal((3, 3))
        s = a @ a.T / 3 + 0.5 * np.eye(3)
        j = int(rng.integers(3))
        lam = float(rng.uniform(0.05, 0.4))
        solution = solve_column(ColumnProgram(sigma_hat=s, target_index=j, lambda_omega=lam))
        assert solution.objective == pytest.approx(vertex_oracle(s, j, lam), abs=1e-6)
        # no feasible lattice point beats the optimum
        feasible = np.max(np.abs(points @ s.T - np.eye(3)[j]), axis=1) <= lam
        if feasible.any():
            assert solution.objective <= np.abs(points[feasible]).sum(axis=1).min() + 1e-9


def test_every_solve_respects_the_penalty(rng):
    for _ in range(20):
        a = rng.standard_normal((5, 5))
        s = as_estimate(a @ a.T / 5 + 0.2 * np.eye(5))
        lam = float(rng.uniform(0.01, 0.5))
        estimate = estimate_precision(s, lam)
        assert estimate.feasibility_gap <= lam + 1e-8


def test_infeasible_error_without_diagnosis_skips_residual():
    with pytest.raises(InfeasibleProgramError) as info:
        solve_column(ColumnProgram(sigma_hat=np.ones((2, 2)), target_index=0, lambda_omega=0.0), diagnose=False)
    assert np.isnan(info.value.min_residual)
