import numpy as np
import pytest

from src.core.classify import (
    discriminant, encode_labels, evaluate, fit_lda, predict, regularized_solve, signal_to_noise, snr_survival,
    stratified_split, t_select,
)
from src.core.estimator import renormalized_covariance
from src.core.mask_model import generate_mask, sample_rho
from src.core.simgen import gen_precision, sample_dataset
from src.models import CvConfig, DiscriminantModel, GraphModelSpec, MaskedDataset, ObservationMask


def two_class_data(seed, n_per_class, d, gap, informative, rho_high=None):
    rng = np.random.default_rng(seed)
    shift = np.zeros(d)
    shift[:informative] = gap
    values = rng.standard_normal((2 * n_per_class, d))
    values[:n_per_class] += shift
    if rho_high is not None:
        mask = generate_mask(2 * n_per_class, d, sample_rho(d, 0.0, rho_high, seed=seed + 1), seed=seed + 2)
        values = np.where(mask.observed, values, np.nan)
    labels = ["A"] * n_per_class + ["B"] * n_per_class
    return MaskedDataset.from_values(values), labels


def identity_model(mu1, mu2):
    sigma = renormalized_covariance(MaskedDataset.from_values(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])))
    sigma = sigma.model_copy(update={"sigma": np.eye(2)})
    return DiscriminantModel(classes=("A", "B"), mu_hat=np.array([mu1, mu2], dtype=float), sigma_hat=sigma,
                             estimator="sample")


def test_encode_labels_sorted_by_default():
    classes, codes = encode_labels(["US", "MA", "US"])
    assert classes == ("MA", "US")
    np.testing.assert_array_equal(codes, [2, 1, 2])
    with pytest.raises(ValueError):
        encode_labels(["a", "b", "c"])


def test_discriminant_hand_example():
    result = discriminant(np.array([0.5, 0.0]), identity_model([1, 0], [-1, 0]))
    assert result.delta1 == pytest.approx(0.0)
    assert result.delta2 == pytest.approx(-1.0)
    assert result.predicted == 1


def test_tie_goes_to_class_two():
    result = discriminant(np.array([0.0, 0.0]), identity_model([1, 0], [-1, 0]))
    assert result.delta1 == pytest.approx(result.delta2)
    assert result.predicted == 2


def test_only_observed_coordinates_matter():
    model = identity_model([1, 0], [-1, 0])
    result = discriminant(np.array([np.nan, 0.7]), model)
    assert result.delta1 == pytest.approx(result.delta2)
    assert result.predicted == 2


def test_masked_coordinates_never_change_output(rng):
    model = identity_model([1, 0.5], [-1, 0.2])
    x = np.array([0.3, 0.9])
    mask = np.array([False, True])
    reference = discriminant(x, model, mask=mask)
    for _ in range(10000):
        fuzzed = x.copy()
        fuzzed[0] = rng.normal(scale=1e6)
        assert discriminant(fuzzed, model, mask=mask) == reference


def test_predict_counts_empty_rows():
    model = identity_model([1, 0], [-1, 0])
    values = np.array([[2.0, 0.0], [np.nan, np.nan]])
    predictions, empty = predict(model, values, np.isfinite(values))
    np.testing.assert_array_equal(predictions, [1, 2])
    assert empty == 1


def test_regularized_solve_escalates_ridge():
    solution, ridge = regularized_solve(np.ones((2, 2)), np.array([1.0, 1.0]))
    assert ridge > 0
    assert np.all(np.isfinite(solution))
    exact, none = regularized_solve(np.diag([2.0, 4.0]), np.array([1.0, 1.0]))
    assert none == 0.0
    np.testing.assert_allclose(exact, [0.5, 0.25])


def test_t_select_all_components_when_k_is_d(rng):
    data = MaskedDataset.from_values(rng.standard_normal((20, 4)))
    labels = ["a"] * 10 + ["b"] * 10
    assert sorted(t_select(data, labels, 4)) == [0, 1, 2, 3]


def test_t_select_finds_shifted_component():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        values = rng.standard_normal((200, 6))
        values[:100, 3] += 10.0
        labels = [1] * 100 + [2] * 100
        hits += t_select(MaskedDataset.from_values(values), labels, 1) == [3]
    assert hits >= 99


def test_stratified_split_keeps_both_classes():
    codes = np.array([1] * 12 + [2] * 6)
    train, test = stratified_split(codes, 5 / 6, seed=4)
    assert set(codes[train]) == {1, 2} and set(codes[test]) == {1, 2}
    assert set(train).isdisjoint(test)
    again = stratified_split(codes, 5 / 6, seed=4)
    np.testing.assert_array_equal(train, again[0])


def test_fit_lda_means_close_to_truth():
    data, labels = two_class_data(1, 500, 3, gap=2.0, informative=1)
    model = fit_lda(data, labels, "sample", CvConfig())
    np.testing.assert_allclose(model.mu_hat[0], [2.0, 0.0, 0.0], atol=0.1)
    np.testing.assert_allclose(model.mu_hat[1], [0.0, 0.0, 0.0], atol=0.1)
    np.testing.assert_allclose(model.sigma_hat.sigma, np.eye(3), atol=0.15)


def test_fit_lda_clime_recovers_identity_precision():
    data, labels = two_class_data(2, 300, 4, gap=1.0, informative=2)
    model = fit_lda(data, labels, "clime", CvConfig(grid=[0.05]))
    assert model.precision is not None
    np.testing.assert_allclose(model.precision.omega, np.eye(4), atol=0.25)


def test_fit_lda_thresholded_selects_penalty():
    data, labels = two_class_data(3, 100, 5, gap=1.0, informative=2, rho_high=0.4)
    model = fit_lda(data, labels, "soft", CvConfig(seed=1))
    assert model.penalty is not None and model.penalty > 0
    np.testing.assert_array_equal(model.sigma_hat.sigma, model.sigma_hat.sigma.T)


def test_evaluate_separated_classes():
    data, labels = two_class_data(5, 150, 20, gap=3.0, informative=10)
    report = evaluate(data, labels, 10, "soft", repeats=3, seed=7)
    assert report.overall_pct >= 90.0
    assert report.classes == ("A", "B")
    assert len(report.per_repeat) == 3


def test_evaluate_is_deterministic_across_threads():
    data, labels = two_class_data(6, 40, 8, gap=1.0, informative=3, rho_high=0.3)
    first = evaluate(data, labels, 4, "sample", repeats=4, seed=3, threads=1)
    second = evaluate(data, labels, 4, "sample", repeats=4, seed=3, threads=2)
    assert first == second


@pytest.mark.slow
def test_identical_classes_near_chance():
    data, labels = two_class_data(8, 150, 20, gap=0.0, informative=0)
    report = evaluate(data, labels, 10, "soft", repeats=20, seed=11)
    assert 40.0 <= report.overall_pct <= 60.0


@pytest.mark.slow
@pytest.mark.parametrize("estimator", ["soft", "hard", "clime"])
def test_masked_band_classes_are_separable(estimator):
    d = 60
    model = gen_precision(GraphModelSpec(kind="band", d=d))
    mask = generate_mask(240, d, sample_rho(d, 0.0, 0.5, seed=1), seed=2)
    base = sample_dataset(np.zeros(d), model.sigma, mask, seed=3)
    values = base.values.copy()
    values[:120, :10] += 3.0
    data = MaskedDataset(values=values, mask=mask)
    labels = ["A"] * 120 + ["B"] * 120
    report = evaluate(data, labels, 25, estimator, repeats=20, seed=4)
    assert report.overall_pct >= 85.0


def test_signal_to_noise_and_survival():
    values = np.array([[1.0, 0.0], [3.0, 1.0], [5.0, 0.0], [7.0, 1.0]])
    ratios = signal_to_noise(MaskedDataset.from_values(values), [1, 1, 2, 2])
    # class means 2 and 6, pooled variance 2
    assert ratios[0] == pytest.approx(-4.0 / np.sqrt(2.0))
    assert ratios[1] == pytest.approx(0.0)
    thresholds, survival = snr_survival(ratios)
    np.testing.assert_allclose(thresholds, [0.0, 4.0 / np.sqrt(2.0)])
    np.testing.assert_allclose(survival, [1.0, 0.5])


def test_signal_to_noise_needs_two_rows_per_class():
    values = np.array([[1.0, np.nan], [2.0, 1.0], [3.0, np.nan], [4.0, 2.0]])
    ratios = signal_to_noise(MaskedDataset.from_values(values), [1, 1, 2, 2])
    assert np.isnan(ratios[1])


@pytest.mark.slow
@pytest.mark.parametrize("estimator", ["soft", "clime"])
def test_more_features_than_training_rows(estimator):
    # 214 rows with a 5/6 split leave 178 training rows for 179 selected features
    data, labels = two_class_data(9, 107, 200, gap=1.0, informative=20, rho_high=0.5)
    tuning = CvConfig(grid=[0.4, 0.6]) if estimator == "clime" else CvConfig()
    report = evaluate(data, labels, 179, estimator, repeats=2, seed=5, tuning=tuning)
    assert all(len(outcome.selected) == 179 for outcome in report.per_repeat)
    assert 0.0 <= report.overall_pct <= 100.0
