from typing import Any, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ThresholdKind = Literal["hard", "soft"]
CovarianceMethod = Literal["renormalized", "naive"]
LossKind = Literal["cov_frobenius", "prec_trace", "prec_squared_trace"]
ExperimentEstimator = Literal[
    "renorm_soft", "renorm_hard", "naive_soft", "naive_hard", "renorm_clime", "naive_clime"
]
ClassifierEstimator = Literal["soft", "hard", "clime", "sample"]

ALL_EXPERIMENT_ESTIMATORS: List[str] = [
    "renorm_soft", "renorm_hard", "naive_soft", "naive_hard", "renorm_clime", "naive_clime"
]


class ArrayModel(BaseModel):
    """Base for models that carry numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True)


def _square(value: Any, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    return arr


# --- Structural-zero patterns ---

class ObservationMask(ArrayModel):
    """n x d structural-zero pattern: 1 = observed, 0 = structurally absent."""
    entries: np.ndarray
    component_names: Optional[List[str]] = None

    @field_validator("entries", mode="before")
    @classmethod
    def _coerce_entries(cls, value: Any) -> np.ndarray:
        arr = np.asarray(value)
        if arr.ndim != 2:
            raise ValueError(f"mask must be a 2-d matrix, got {arr.ndim} dimensions")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask entries must be exactly 0 or 1")
        arr = arr.astype(np.int8)
        empty = np.flatnonzero(arr.sum(axis=1) == 0)
        if empty.size:
            raise ValueError(f"mask rows {empty[:10].tolist()} have no observed component")
        return arr

    @model_validator(mode="after")
    def _check_names(self) -> "ObservationMask":
        if self.component_names is not None and len(self.component_names) != self.d:
            raise ValueError(f"{len(self.component_names)} component names for {self.d} columns")
        return self

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def d(self) -> int:
        return int(self.entries.shape[1])

    @property
    def observed(self) -> np.ndarray:
        return self.entries.astype(bool)


class CoObservationCounts(ArrayModel):
    """|n(l, m)| for every component pair and |n(l)| for every component."""
    pair_counts: np.ndarray
    singleton_counts: np.ndarray
    n: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "CoObservationCounts":
        pairs = self.pair_counts
        if pairs.ndim != 2 or pairs.shape[0] != pairs.shape[1]:
            raise ValueError("pair_counts must be square")
        if not np.array_equal(pairs, pairs.T):
            raise ValueError("pair_counts must be symmetric")
        if not np.array_equal(np.diag(pairs), self.singleton_counts):
            raise ValueError("pair_counts diagonal must equal singleton_counts")
        return self


class MaskDistribution(ArrayModel):
    """Per-component missingness probabilities rho_j."""
    rho: np.ndarray

    @field_validator("rho", mode="before")
    @classmethod
    def _check_rho(cls, value: Any) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.ndim != 1:
            raise ValueError("rho must be a vector")
        if not np.all((arr >= 0.0) & (arr < 1.0)):
            bad = np.flatnonzero(~((arr >= 0.0) & (arr < 1.0)))
            raise ValueError(f"rho must lie in [0, 1); components {bad[:10].tolist()} do not")
        return arr

    @property
    def d(self) -> int:
        return int(self.rho.shape[0])


class A1Report(BaseModel):
    """Empirical co-observation diagnostic for condition (A1)."""
    n: int
    min_fraction: float
    violations: List[Tuple[int, int]]
    fractions: List[float]
    passed: bool


# --- Datasets and estimates ---

class MaskedDataset(ArrayModel):
    """n x d real values paired with their structural-zero mask.

    Unobserved positions hold NaN, the not-available sentinel.
    """
    values: np.ndarray
    mask: ObservationMask
    component_names: Optional[List[str]] = None
    row_ids: Optional[List[int]] = None

    @model_validator(mode="after")
    def _check_alignment(self) -> "MaskedDataset":
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.mask.entries.shape:
            raise ValueError(f"values shape {values.shape} does not match mask shape {self.mask.entries.shape}")
        observed = self.mask.observed
        if not np.all(np.isfinite(values[observed])):
            raise ValueError("values must be finite wherever the mask is 1")
        self.values = np.where(observed, values, np.nan)
        if self.component_names is not None and len(self.component_names) != values.shape[1]:
            raise ValueError(f"{len(self.component_names)} component names for {values.shape[1]} columns")
        if self.row_ids is not None and len(self.row_ids) != values.shape[0]:
            raise ValueError(f"{len(self.row_ids)} row ids for {values.shape[0]} rows")
        return self

    @classmethod
    def from_values(cls, values: Any, component_names: Optional[Sequence[str]] = None,
                    row_ids: Optional[Sequence[int]] = None) -> "MaskedDataset":
        """Builds a dataset whose mask is the set of finite entries of `values`."""
        arr = np.asarray(values, dtype=float)
        mask = ObservationMask(entries=np.isfinite(arr).astype(np.int8))
        return cls(values=arr, mask=mask,
                   component_names=list(component_names) if component_names is not None else None,
                   row_ids=list(row_ids) if row_ids is not None else None)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])

    @property
    def names(self) -> List[str]:
        return self.component_names or [f"X{j + 1}" for j in range(self.d)]

    def take(self, rows: Optional[Sequence[int]] = None,
             columns: Optional[Sequence[int]] = None) -> "MaskedDataset":
        """Returns the sub-dataset on the given rows and columns (in the given order)."""
        row_idx = np.arange(self.n) if rows is None else np.asarray(rows, dtype=int)
        col_idx = np.arange(self.d) if columns is None else np.asarray(columns, dtype=int)
        values = self.values[np.ix_(row_idx, col_idx)]
        entries = self.mask.entries[np.ix_(row_idx, col_idx)]
        ids = self.row_ids if self.row_ids is not None else list(range(self.n))
        return MaskedDataset(
            values=values,
            mask=ObservationMask(entries=entries),
            component_names=[self.names[j] for j in col_idx] if self.component_names is not None else None,
            row_ids=[ids[i] for i in row_idx],
        )


class ThresholdOperator(BaseModel):
    """A generalized thresholding operator s_lambda."""
    kind: ThresholdKind
    lam: float = Field(ge=0.0)
    include_diagonal: bool = True


class CovarianceEstimate(ArrayModel):
    """Symmetric d x d covariance estimate with its co-observation counts."""
    sigma: np.ndarray
    counts: CoObservationCounts
    zeroed_pairs: List[Tuple[int, int]] = Field(default_factory=list)
    method: CovarianceMethod = "renormalized"
    threshold: Optional[ThresholdOperator] = None
    component_names: Optional[List[str]] = None

    @field_validator("sigma", mode="before")
    @classmethod
    def _check_sigma(cls, value: Any) -> np.ndarray:
        arr = _square(value, "sigma")
        if not np.array_equal(arr, arr.T):
            raise ValueError("sigma must be exactly symmetric")
        return arr

    @property
    def d(self) -> int:
        return int(self.sigma.shape[0])


class ColumnProgram(ArrayModel):
    """One column of the CLIME program: min ||b||_1 s.t. ||S b - e_j||_inf <= lambda."""
    sigma_hat: np.ndarray
    target_index: int = Field(ge=0)
    lambda_omega: float = Field(ge=0.0)

    @field_validator("sigma_hat", mode="before")
    @classmethod
    def _check_sigma_hat(cls, value: Any) -> np.ndarray:
        return _square(value, "sigma_hat")

    @model_validator(mode="after")
    def _check_index(self) -> "ColumnProgram":
        if self.target_index >= self.sigma_hat.shape[0]:
            raise ValueError(f"target_index {self.target_index} out of range for d={self.sigma_hat.shape[0]}")
        return self


class ColumnSolution(ArrayModel):
    beta: np.ndarray
    residual: float
    objective: float
    iterations: int


class PrecisionEstimate(ArrayModel):
    """Symmetrized CLIME estimate of the precision matrix."""
    omega: np.ndarray
    lambda_omega: float = Field(ge=0.0)
    feasibility_gap: float
    iterations: List[int] = Field(default_factory=list)
    component_names: Optional[List[str]] = None

    @property
    def d(self) -> int:
        return int(self.omega.shape[0])


# --- Tuning ---

def _check_penalty_grid(value: Optional[List[float]]) -> Optional[List[float]]:
    if value is None:
        return value
    if not value:
        raise ValueError("grid must not be empty")
    if any(not np.isfinite(v) or v <= 0 for v in value):
        raise ValueError("grid values must be finite and strictly positive")
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ValueError("grid must be sorted in strictly increasing order")
    return value


class CvConfig(BaseModel):
    """Cross-validation settings; grid=None selects the data-driven default grid."""
    folds: int = Field(default=5, ge=2)
    grid: Optional[List[float]] = None
    loss_kind: LossKind = "cov_frobenius"
    seed: int = 0

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        return _check_penalty_grid(value)


class CvResult(BaseModel):
    penalties: List[float]
    mean_losses: List[float]
    fold_losses: List[List[float]]
    selected: float
    loss_kind: LossKind


# --- Simulation ---

class GraphModelSpec(BaseModel):
    """Parameters of a band or cluster Gaussian graphical model."""
    kind: Literal["band", "cluster"]
    d: int = Field(ge=2)
    groups: Optional[int] = Field(default=None, ge=1)
    off_diag_value: float = 0.5
    seed: int = 0

    @model_validator(mode="after")
    def _check_groups(self) -> "GraphModelSpec":
        if self.groups is not None and self.groups > self.d:
            raise ValueError(f"groups={self.groups} exceeds d={self.d}")
        if not np.isfinite(self.off_diag_value):
            raise ValueError("off_diag_value must be finite")
        return self

    @property
    def resolved_groups(self) -> int:
        """Bandwidth or cluster count: max(1, round-half-up(d / 20)) unless given."""
        if self.groups is not None:
            return self.groups
        return max(1, int(np.floor(self.d / 20 + 0.5)))


class GraphModel(ArrayModel):
    spec: GraphModelSpec
    omega: np.ndarray
    sigma: np.ndarray
    adjacency: np.ndarray


class ExperimentGrid(BaseModel):
    n_values: List[int]
    d_values: List[int]
    replicates: int = Field(default=20, ge=1)
    estimators: List[ExperimentEstimator] = Field(default_factory=lambda: list(ALL_EXPERIMENT_ESTIMATORS))
    seed: int = 0
    rho_low: float = 0.0
    rho_high: float = 0.75
    cv_folds: int = Field(default=5, ge=2)
    include_diagonal: bool = True
    # lambda_omega candidates for the CLIME estimators; None uses the default grid
    precision_grid: Optional[List[float]] = None

    @field_validator("n_values", "d_values")
    @classmethod
    def _check_sizes(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("size lists must not be empty")
        if any(v < 2 for v in value):
            raise ValueError("all n and d values must be >= 2")
        return value

    @field_validator("estimators")
    @classmethod
    def _check_estimators(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one estimator is required")
        return value

    @field_validator("precision_grid")
    @classmethod
    def _check_precision_grid(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        return _check_penalty_grid(value)

    @property
    def total_models(self) -> int:
        return len(self.n_values) * len(self.d_values) * self.replicates


class ExperimentRecord(BaseModel):
    kind: str
    estimator: str
    n: int
    d: int
    rep: int
    seed: int
    spectral_error: float
    n_over_logd: float


class ExperimentFailure(BaseModel):
    kind: str
    n: int
    d: int
    rep: int
    seed: int
    error: str


class ExperimentResult(BaseModel):
    records: List[ExperimentRecord] = Field(default_factory=list)
    failures: List[ExperimentFailure] = Field(default_factory=list)


# --- Count tables ---

class CountTable(ArrayModel):
    """n x (d + 1) taxa counts with optional per-row group labels."""
    counts: np.ndarray
    taxa_names: List[str]
    group_labels: Optional[List[str]] = None

    @field_validator("counts", mode="before")
    @classmethod
    def _check_counts(cls, value: Any) -> np.ndarray:
        arr = np.asarray(value)
        if arr.ndim != 2:
            raise ValueError("counts must be a 2-d table")
        as_float = arr.astype(float)
        if not np.all(np.isfinite(as_float)) or np.any(as_float < 0) or np.any(as_float != np.floor(as_float)):
            raise ValueError("counts must be non-negative integers")
        return as_float.astype(np.int64)

    @model_validator(mode="after")
    def _check_labels(self) -> "CountTable":
        if len(self.taxa_names) != self.counts.shape[1]:
            raise ValueError(f"{len(self.taxa_names)} taxa names for {self.counts.shape[1]} columns")
        if len(set(self.taxa_names)) != len(self.taxa_names):
            raise ValueError("taxa names must be unique")
        if self.group_labels is not None and len(self.group_labels) != self.counts.shape[0]:
            raise ValueError(f"{len(self.group_labels)} group labels for {self.counts.shape[0]} rows")
        return self

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])


class ReferenceChoice(BaseModel):
    index: int = Field(ge=0)
    name: str


# --- Classification ---

class DiscriminantModel(ArrayModel):
    """Per-class available-case means with a shared covariance estimate."""
    classes: Tuple[Any, Any]
    mu_hat: np.ndarray
    sigma_hat: CovarianceEstimate
    estimator: ClassifierEstimator
    penalty: Optional[float] = None
    ridge_used: float = 0.0
    precision: Optional[PrecisionEstimate] = None


class DiscriminantResult(BaseModel):
    delta1: float
    delta2: float
    predicted: Literal[1, 2]
    ridge_used: float = 0.0


class RepeatOutcome(BaseModel):
    repeat: int
    seed: int
    selected: List[int]
    penalty: Optional[float] = None
    class1_pct: float
    class2_pct: float
    overall_pct: float
    n_test1: int
    n_test2: int
    empty_test_rows: int = 0


class EvaluationReport(BaseModel):
    estimator: ClassifierEstimator
    k: int
    classes: Tuple[Any, Any]
    class1_pct: float = Field(ge=0.0, le=100.0)
    class2_pct: float = Field(ge=0.0, le=100.0)
    overall_pct: float = Field(ge=0.0, le=100.0)
    repeats: int
    per_repeat: List[RepeatOutcome]


# --- Metrics ---

class NormReport(BaseModel):
    l0: int = Field(ge=0)
    l1: float = Field(ge=0.0)
    sup: float = Field(ge=0.0)
    spectral: float = Field(ge=0.0)
    frobenius: float = Field(ge=0.0)


class OperatorViolation(BaseModel):
    condition: Literal["shrinkage", "zeroing", "proximity"]
    x: float
    value: float
    lam: float


class OperatorCheck(BaseModel):
    passed: bool
    points_checked: int
    violation: Optional[OperatorViolation] = None


# --- Command line ---

Subcommand = Literal["simulate", "estimate-cov", "estimate-prec", "classify", "ingest"]


class RunConfig(BaseModel):
    """Everything a command-line run depends on; together with the seed it fixes the outputs."""
    subcommand: Subcommand
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    out_dir: str = "results"
    log_level: str = "INFO"
    report_norms: bool = False

    # estimate-cov / estimate-prec
    input_path: Optional[str] = None
    covariance: CovarianceMethod = "renormalized"
    threshold: Literal["soft", "hard", "none"] = "soft"
    lambda_value: Optional[float] = Field(default=None, ge=0.0)
    lambda_omega: Optional[float] = Field(default=None, ge=0.0)
    include_diagonal: bool = True
    cv_folds: int = Field(default=5, ge=2)
    grid: Optional[List[float]] = None
    prec_loss: Literal["prec_trace", "prec_squared_trace"] = "prec_trace"
    min_fraction: float = Field(default=0.05, gt=0.0, lt=1.0)

    # simulate
    kind: Literal["band", "cluster"] = "band"
    n_values: List[int] = Field(default_factory=lambda: [75, 150, 300])
    d_values: List[int] = Field(default_factory=lambda: [25, 50])
    replicates: int = Field(default=20, ge=1)
    estimators: List[ExperimentEstimator] = Field(default_factory=lambda: list(ALL_EXPERIMENT_ESTIMATORS))
    rho_low: float = 0.0
    rho_high: float = 0.75
    off_diag_value: float = 0.5
    groups: Optional[int] = Field(default=None, ge=1)
    precision_grid: Optional[List[float]] = None

    # ingest / classify
    counts_path: Optional[str] = None
    reference: Optional[str] = None
    group_column: str = "group"
    min_prevalence: float = Field(default=0.2, gt=0.0, le=1.0)
    classes: Optional[List[str]] = None
    k_values: List[int] = Field(default_factory=lambda: [10, 25, 50])
    classifier_estimators: List[ClassifierEstimator] = Field(default_factory=lambda: ["soft"])
    repeats: int = Field(default=20, ge=1)
    train_fraction: float = Field(default=5 / 6, gt=0.0, lt=1.0)
    welch: bool = True
    report_snr: bool = False
