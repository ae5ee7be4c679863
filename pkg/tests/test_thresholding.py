import numpy as np
import pytest

from conftest import masked
from src.core.estimator import renormalized_covariance
from src.core.metrics import norms
from src.core.thresholding import (
    apply_threshold, default_lambda_grid, hard_threshold, soft_threshold, validate_operator,
)
from src.models import ThresholdOperator


def test_soft_threshold_closed_form():
    assert soft_threshold(1.2, 0.5) == pytest.approx(0.7)
    assert soft_threshold(-0.3, 0.5) == 0.0
    x = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(soft_threshold(x, 0.0), x)


def test_hard_threshold_closed_form():
    assert hard_threshold(0.4, 0.5) == 0.0
    assert hard_threshold(0.6, 0.5) == 0.6
    assert hard_threshold(-2.0, 1.0) == -2.0


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


@pytest.mark.parametrize("x,lam", [(1.2, 0.5), (-0.3, 0.5), (-2.5, 0.7), (0.05, 0.0)])
def test_soft_threshold_minimises_penalised_objective(x, lam):
    theta = np.linspace(-4.0, 4.0, 160001)
    objective = 0.5 * (theta - x) ** 2 + lam * np.abs(theta)
    assert soft_threshold(x, lam) == pytest.approx(theta[np.argmin(objective)], abs=1e-4)


def _estimate():
    return renormalized_covariance(masked([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [-1.0, 0.5]]))


def test_apply_threshold_identity_at_zero():
    estimate = _estimate()
    result = apply_threshold(estimate, ThresholdOperator(kind="hard", lam=0.0))
    np.testing.assert_array_equal(result.sigma, estimate.sigma)


def test_apply_threshold_kills_everything_above_sup():
    estimate = _estimate()
    lam = float(np.abs(estimate.sigma).max())
    result = apply_threshold(estimate, ThresholdOperator(kind="soft", lam=lam))
    assert (result.sigma == 0).all()


def test_apply_threshold_two_by_two():
    estimate = _estimate().model_copy(update={"sigma": np.array([[1.0, 0.3], [0.3, 1.0]])})
    result = apply_threshold(estimate, ThresholdOperator(kind="soft", lam=0.4))
    np.testing.assert_allclose(result.sigma, [[0.6, 0.0], [0.0, 0.6]])
    assert result.threshold.lam == 0.4


def test_apply_threshold_can_keep_diagonal():
    estimate = _estimate().model_copy(update={"sigma": np.array([[1.0, 0.3], [0.3, 1.0]])})
    result = apply_threshold(estimate, ThresholdOperator(kind="soft", lam=0.4, include_diagonal=False))
    np.testing.assert_allclose(result.sigma, [[1.0, 0.0], [0.0, 1.0]])


def test_default_grid_ascending_and_bounded():
    grid = default_lambda_grid(np.array([[2.0, -0.5], [-0.5, 1.0]]), num=10)
    assert grid == sorted(grid)
    assert grid[-1] == pytest.approx(2.0)
    assert len(grid) == 10


def test_operators_satisfy_contract(rng):
    points = rng.uniform(-10, 10, 100000)
    assert validate_operator(ThresholdOperator(kind="soft", lam=0.8), points).passed
    assert validate_operator(ThresholdOperator(kind="hard", lam=0.8), points).passed


def test_shifting_map_violates_proximity():
    check = validate_operator(lambda x, lam: x + 2 * lam, [3.0], lam=0.5)
    assert not check.passed
    assert check.violation.condition in ("shrinkage", "proximity")


def test_shifting_map_on_negative_input_flags_proximity():
    # on negative inputs x + 2 lam still shrinks, so only proximity fails
    check = validate_operator(lambda x, lam: x + 2 * lam, [-3.0], lam=0.5)
    assert check.violation.condition == "proximity"


def test_bare_callable_needs_lambda():
    with pytest.raises(ValueError):
        validate_operator(lambda x, lam: x, [1.0])


def test_randomized_penalties_satisfy_contract(rng):
    for _ in range(100):
        lam = float(rng.uniform(0.0, 3.0))
        points = rng.uniform(-5.0, 5.0, 1000)
        for kind in ("soft", "hard"):
            check = validate_operator(ThresholdOperator(kind=kind, lam=lam), points)
            assert check.passed, check.violation


@pytest.mark.parametrize("kind", ["soft", "hard"])
def test_apply_threshold_never_increases_norms(kind, rng):
    for _ in range(30):
        a = rng.standard_normal((6, 6))
        estimate = _estimate().model_copy(update={"sigma": a + a.T})
        lam = float(rng.uniform(0.0, 2.0))
        before = norms(estimate.sigma, tol=0.0)
        after = norms(apply_threshold(estimate, ThresholdOperator(kind=kind, lam=lam)).sigma, tol=0.0)
        assert after.sup <= before.sup
        assert after.frobenius <= before.frobenius
        assert after.l0 <= before.l0
