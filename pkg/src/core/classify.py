import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import ttest_ind
from sklearn.model_selection import StratifiedShuffleSplit

from ..exceptions import DegenerateClassError, NumericalError
from ..models import (
    CvConfig, DiscriminantModel, DiscriminantResult, EvaluationReport, MaskedDataset, RepeatOutcome,
    ThresholdOperator,
)
from .clime import estimate_precision
from .estimator import available_means, renormalized_covariance
from .seeds import derive_seed
from .thresholding import apply_threshold
from .tuning import cv_covariance, cv_precision

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
RIDGE_START = 1e-8
RIDGE_FACTOR = 10.0
RIDGE_CAP = 1e8
MAX_SPLIT_ATTEMPTS = 100


def encode_labels(labels: Sequence[Any], classes: Optional[Sequence[Any]] = None) -> Tuple[Tuple[Any, Any], np.ndarray]:
    """Maps two-class labels to 1/2 codes.

    Without `classes`, class 1 is the smaller of the two sorted labels.
    """
    labels = np.asarray(labels)
    if classes is None:
        found = sorted(set(labels.tolist()))
        if len(found) != 2:
            raise ValueError(f"expected exactly two classes, found {len(found)}: {found[:10]}")
        classes = found
    if len(classes) != 2:
        raise ValueError(f"expected two classes, got {list(classes)}")
    first, second = classes
    codes = np.where(labels == first, 1, np.where(labels == second, 2, 0))
    if np.any(codes == 0):
        raise ValueError(f"labels outside the classes {first!r}, {second!r}")
    return (first, second), codes


def regularized_solve(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, float]:
    """Solves a x = b, adding a ridge eps*I (eps = 1e-8, x10 per step) when a is singular or ill-conditioned."""
    identity = np.eye(a.shape[0])
    ridge = 0.0
    while True:
        matrix = a + ridge * identity
        try:
            condition = np.linalg.cond(matrix)
            if not np.isfinite(condition) or condition > MAX_CONDITION:
                raise np.linalg.LinAlgError(f"condition number {condition:.3g}")
            solution = np.linalg.solve(matrix, b)
            if ridge > 0:
                logger.debug(f"regularized_solve: ridge {ridge:.1e} needed")
            return solution, ridge
        except np.linalg.LinAlgError:
            ridge = RIDGE_START if ridge == 0.0 else ridge * RIDGE_FACTOR
            if ridge > RIDGE_CAP:
                raise NumericalError(f"matrix stays singular with ridge up to {RIDGE_CAP:.0e}")


def t_statistics(data: MaskedDataset, labels: Sequence[Any], welch: bool = True,
                 classes: Optional[Sequence[Any]] = None) -> np.ndarray:
    """Absolute two-sample t statistic per component over each class's observed rows.

    Components observed in fewer than 2 rows of either class score 0.
    """
    _, codes = encode_labels(labels, classes)
    observed = data.mask.observed
    scores = np.zeros(data.d)
    for j in range(data.d):
        first = data.values[observed[:, j] & (codes == 1), j]
        second = data.values[observed[:, j] & (codes == 2), j]
        if first.size < 2 or second.size < 2:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            statistic = ttest_ind(first, second, equal_var=not welch).statistic
        if np.isfinite(statistic):
            scores[j] = abs(float(statistic))
    return scores


def t_select(data: MaskedDataset, labels: Sequence[Any], k: int, welch: bool = True,
             classes: Optional[Sequence[Any]] = None) -> List[int]:
    """Indices of the k components with the largest |t|, most significant first."""
    if not 1 <= k <= data.d:
        raise ValueError(f"k must lie in [1, {data.d}], got {k}")
    scores = t_statistics(data, labels, welch=welch, classes=classes)
    order = np.argsort(-scores, kind="stable")
    return [int(j) for j in order[:k]]


def fit_lda(train: MaskedDataset, labels: Sequence[Any], estimator: str, tuning: CvConfig,
            classes: Optional[Sequence[Any]] = None, threads: int = 1) -> DiscriminantModel:
    """Fits class means and a shared covariance for the linear discriminant.

    Class means are available-case means of each class's rows. The shared
    covariance is the renormalized estimate of the class-centred pooled rows,
    then thresholded (soft/hard), left raw (sample), or replaced by the inverse
    of the CLIME precision estimate (clime); penalties are cross-validated on
    the pooled rows.
    """
    classes, codes = encode_labels(labels, classes)
    for code, label in ((1, classes[0]), (2, classes[1])):
        if np.count_nonzero(codes == code) < 2:
            raise DegenerateClassError(f"class {label!r} has fewer than two training rows")

    mu_hat = np.vstack([available_means(train.take(rows=np.flatnonzero(codes == code))) for code in (1, 2)])
    pooled = MaskedDataset(values=train.values - mu_hat[codes - 1], mask=train.mask,
                           component_names=train.component_names)
    base = renormalized_covariance(pooled)

    penalty: Optional[float] = None
    precision = None
    ridge = 0.0
    if estimator in ("soft", "hard"):
        cfg = tuning.model_copy(update={"loss_kind": "cov_frobenius"})
        penalty = cv_covariance(pooled, estimator, cfg).selected
        sigma_hat = apply_threshold(base, ThresholdOperator(kind=estimator, lam=penalty))
    elif estimator == "clime":
        loss_kind = tuning.loss_kind if tuning.loss_kind != "cov_frobenius" else "prec_trace"
        penalty = cv_precision(pooled, tuning.model_copy(update={"loss_kind": loss_kind}), threads=threads).selected
        precision = estimate_precision(base, penalty, threads=threads)
        inverse, ridge = regularized_solve(precision.omega, np.eye(base.d))
        if ridge > 0:
            logger.warning(f"fit_lda: precision estimate singular, inverted with ridge {ridge:.1e}")
        sigma_hat = base.model_copy(update={"sigma": (inverse + inverse.T) / 2.0})
    elif estimator == "sample":
        sigma_hat = base
    else:
        raise ValueError(f"unknown estimator '{estimator}'")

    return DiscriminantModel(classes=classes, mu_hat=mu_hat, sigma_hat=sigma_hat, estimator=estimator,
                             penalty=penalty, ridge_used=ridge, precision=precision)


def discriminant(x: np.ndarray, model: DiscriminantModel,
                 mask: Optional[np.ndarray] = None) -> DiscriminantResult:
    """Evaluates delta_r(x_A) = x_A' S_AA^-1 mu_rA - mu_rA' S_AA^-1 mu_rA / 2 on the observed set A.

    A is `mask` when given, otherwise the finite entries of x. Class 1 wins only
    when delta_1 > delta_2.
    """
    x = np.asarray(x, dtype=float)
    observed = np.isfinite(x) if mask is None else np.asarray(mask).astype(bool)
    a = np.flatnonzero(observed)
    if a.size == 0:
        raise ValueError("observation has no observed component")
    s_aa = model.sigma_hat.sigma[np.ix_(a, a)]
    mu_a = model.mu_hat[:, a].T
    weights, ridge = regularized_solve(s_aa, mu_a)
    deltas = x[a] @ weights - 0.5 * np.sum(mu_a * weights, axis=0)
    predicted = 1 if deltas[0] - deltas[1] > 0 else 2
    return DiscriminantResult(delta1=float(deltas[0]), delta2=float(deltas[1]), predicted=predicted,
                              ridge_used=ridge)


def predict(model: DiscriminantModel, values: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, int]:
    """Predicted class codes for each row; rows with nothing observed fall to class 2."""
    predictions = np.full(values.shape[0], 2, dtype=int)
    empty = 0
    for i in range(values.shape[0]):
        if not mask[i].any():
            empty += 1
            continue
        predictions[i] = discriminant(values[i], model, mask=mask[i]).predicted
    return predictions, empty


def stratified_split(codes: np.ndarray, train_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded stratified train/test split with at least two training and one test row per class."""
    for attempt in range(MAX_SPLIT_ATTEMPTS):
        splitter = StratifiedShuffleSplit(n_splits=1, train_size=train_fraction,
                                          random_state=derive_seed(seed, attempt))
        train, test = next(splitter.split(np.zeros(codes.size), codes))
        counts_ok = all(
            np.count_nonzero(codes[train] == c) >= 2 and np.count_nonzero(codes[test] == c) >= 1
            for c in (1, 2)
        )
        if counts_ok:
            return np.sort(train), np.sort(test)
        logger.warning(f"stratified_split: split attempt {attempt} lacks a class, resampling")
    raise DegenerateClassError(f"no split with both classes in train and test after {MAX_SPLIT_ATTEMPTS} attempts")


def _evaluate_repeat(data: MaskedDataset, codes: np.ndarray, k: int, estimator: str, repeat: int,
                     train_fraction: float, seed: int, tuning: CvConfig, welch: bool) -> RepeatOutcome:
    repeat_seed = derive_seed(seed, repeat)
    # 1. Stratified split
    train_idx, test_idx = stratified_split(codes, train_fraction, repeat_seed)

    # 2. Select features on the training rows only
    selected = t_select(data.take(rows=train_idx), codes[train_idx], k, welch=welch, classes=(1, 2))
    # drop training rows with no observed selected feature
    usable = data.mask.observed[np.ix_(train_idx, selected)].any(axis=1)
    train_idx = train_idx[usable]
    train = data.take(rows=train_idx, columns=selected)
    # 3. Fit
    model = fit_lda(train, codes[train_idx], estimator,
                    tuning.model_copy(update={"seed": derive_seed(repeat_seed, 1)}), classes=(1, 2))

    # 4. Score held-out rows
    test_values = data.values[np.ix_(test_idx, selected)]
    test_mask = data.mask.observed[np.ix_(test_idx, selected)]
    predictions, empty = predict(model, test_values, test_mask)
    truth = codes[test_idx]
    n1 = int(np.count_nonzero(truth == 1))
    n2 = int(np.count_nonzero(truth == 2))
    correct1 = int(np.count_nonzero((predictions == 1) & (truth == 1)))
    correct2 = int(np.count_nonzero((predictions == 2) & (truth == 2)))
    return RepeatOutcome(
        repeat=repeat,
        seed=repeat_seed,
        selected=selected,
        penalty=model.penalty,
        class1_pct=100.0 * correct1 / n1,
        class2_pct=100.0 * correct2 / n2,
        overall_pct=100.0 * (correct1 + correct2) / (n1 + n2),
        n_test1=n1,
        n_test2=n2,
        empty_test_rows=empty,
    )


def evaluate(data: MaskedDataset, labels: Sequence[Any], k: int, estimator: str, repeats: int = 20,
             train_fraction: float = 5 / 6, seed: int = 0, tuning: Optional[CvConfig] = None,
             classes: Optional[Sequence[Any]] = None, welch: bool = True, threads: int = 1) -> EvaluationReport:
    """Repeated stratified train/test evaluation of the two-class discriminant.

    Each repeat selects k features by t test on the training rows, fits the
    discriminant there and scores the held-out rows. Percentages are averaged
    over repeats.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if not 1 <= k <= data.d:
        raise ValueError(f"k must lie in [1, {data.d}], got {k}")
    classes, codes = encode_labels(labels, classes)
    tuning = tuning or CvConfig()

    def run(repeat: int) -> RepeatOutcome:
        logger.debug(f"evaluate: repeat {repeat + 1}/{repeats} ({estimator}, k={k})")
        return _evaluate_repeat(data, codes, k, estimator, repeat, train_fraction, seed, tuning, welch)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, range(repeats)))
    else:
        outcomes = [run(r) for r in range(repeats)]

    report = EvaluationReport(
        estimator=estimator,
        k=k,
        classes=classes,
        class1_pct=float(np.mean([o.class1_pct for o in outcomes])),
        class2_pct=float(np.mean([o.class2_pct for o in outcomes])),
        overall_pct=float(np.mean([o.overall_pct for o in outcomes])),
        repeats=repeats,
        per_repeat=outcomes,
    )
    logger.info(f"evaluate {classes[0]!r} vs {classes[1]!r} ({estimator}, k={k}): "
                f"{report.class1_pct:.1f}% / {report.class2_pct:.1f}% / overall {report.overall_pct:.1f}%")
    return report


def signal_to_noise(data: MaskedDataset, labels: Sequence[Any],
                    classes: Optional[Sequence[Any]] = None) -> np.ndarray:
    """Per-component difference of available-case class means over the pooled standard deviation.

    Components without two observations in each class, or with zero pooled
    variance, get NaN.
    """
    _, codes = encode_labels(labels, classes)
    observed = data.mask.observed
    ratios = np.full(data.d, np.nan)
    for j in range(data.d):
        first = data.values[observed[:, j] & (codes == 1), j]
        second = data.values[observed[:, j] & (codes == 2), j]
        if first.size < 2 or second.size < 2:
            continue
        pooled = ((first.size - 1) * first.var(ddof=1) + (second.size - 1) * second.var(ddof=1)) \
            / (first.size + second.size - 2)
        if pooled > 0:
            ratios[j] = (first.mean() - second.mean()) / np.sqrt(pooled)
    return ratios


def snr_survival(ratios: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Empirical survival function P(|S/N| >= t) evaluated at the sorted finite |S/N| values."""
    values = np.sort(np.abs(ratios[np.isfinite(ratios)]))
    m = values.size
    survival = (m - np.arange(m)) / m if m else np.empty(0)
    return values, survival
