import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..models import (
    CvConfig, ExperimentFailure, ExperimentGrid, ExperimentRecord, ExperimentResult, GraphModelSpec,
    ThresholdOperator,
)
from .clime import estimate_precision
from .estimator import covariance_for
from .mask_model import generate_mask, sample_rho
from .metrics import spectral_norm
from .seeds import derive_seed
from .simgen import gen_precision, sample_dataset
from .thresholding import apply_threshold
from .tuning import cv_covariance, cv_precision

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ["kind", "estimator", "n", "d", "rep", "seed", "spectral_error", "n_over_logd"]

# estimator name -> (covariance method, threshold kind or "clime")
ESTIMATOR_PARTS = {
    "renorm_soft": ("renormalized", "soft"),
    "renorm_hard": ("renormalized", "hard"),
    "naive_soft": ("naive", "soft"),
    "naive_hard": ("naive", "hard"),
    "renorm_clime": ("renormalized", "clime"),
    "naive_clime": ("naive", "clime"),
}

ReplicateTask = Tuple[int, int, int, int]  # (d, n, rep, seed)
ProgressCallback = Callable[[int, int, str], None]


class ReplicateProcessor:
    """Runs one simulated replicate: model, mask, dataset, then every requested estimator."""

    def __init__(self, grid: ExperimentGrid, template: GraphModelSpec, threads: int = 1):
        self.grid = grid
        self.template = template
        self.threads = threads

    def _fit_error(self, estimator: str, data, truth_sigma: np.ndarray, truth_omega: np.ndarray,
                   cv_seed: int) -> float:
        method, kind = ESTIMATOR_PARTS[estimator]
        if kind == "clime":
            cfg = CvConfig(folds=self.grid.cv_folds, grid=self.grid.precision_grid, loss_kind="prec_trace",
                           seed=cv_seed)
            lam = cv_precision(data, cfg, method=method, threads=self.threads).selected
            omega = estimate_precision(covariance_for(data, method), lam, threads=self.threads).omega
            return spectral_norm(omega - truth_omega)
        cfg = CvConfig(folds=self.grid.cv_folds, loss_kind="cov_frobenius", seed=cv_seed)
        include_diagonal = self.grid.include_diagonal
        lam = cv_covariance(data, kind, cfg, method=method, include_diagonal=include_diagonal).selected
        op = ThresholdOperator(kind=kind, lam=lam, include_diagonal=include_diagonal)
        estimate = apply_threshold(covariance_for(data, method), op)
        return spectral_norm(estimate.sigma - truth_sigma)

    def process_replicate(self, task: ReplicateTask) -> Tuple[List[ExperimentRecord], Optional[ExperimentFailure]]:
        """Processes a single replicate; failures are reported, not raised."""
        d, n, rep, seed = task
        label = f"Replicate d={d} n={n} rep={rep}"
        kind = self.template.kind
        records: List[ExperimentRecord] = []
        try:
            # 1. Model
            logger.debug(f"{label}: Step 1 - Generating {kind} model...")
            spec = GraphModelSpec.model_validate({**self.template.model_dump(), "d": d, "seed": seed})
            model = gen_precision(spec)

            # 2. Mask and data
            logger.debug(f"{label}: Step 2 - Drawing mask and dataset...")
            rho = sample_rho(d, self.grid.rho_low, self.grid.rho_high, seed=derive_seed(seed, 0))
            mask = generate_mask(n, d, rho, seed=derive_seed(seed, 1))
            data = sample_dataset(np.zeros(d), model.sigma, mask, seed=derive_seed(seed, 2))

            # 3. Estimators, each with its own cross-validated penalty
            logger.debug(f"{label}: Step 3 - Fitting {len(self.grid.estimators)} estimators...")
            for estimator in self.grid.estimators:
                error = self._fit_error(estimator, data, model.sigma, model.omega, derive_seed(seed, 3))
                records.append(ExperimentRecord(
                    kind=kind, estimator=estimator, n=n, d=d, rep=rep, seed=seed,
                    spectral_error=error, n_over_logd=n / math.log(d),
                ))
        except Exception as e:
            error_type = type(e).__name__
            logger.warning(f"{label}: failed with {error_type}: {e}. Skipping replicate.")
            return [], ExperimentFailure(kind=kind, n=n, d=d, rep=rep, seed=seed, error=f"{error_type}: {e}")

        logger.debug(f"{label}: finished, {len(records)} records.")
        return records, None


def experiment_tasks(grid: ExperimentGrid) -> List[ReplicateTask]:
    tasks = []
    for d_idx, d in enumerate(grid.d_values):
        for n_idx, n in enumerate(grid.n_values):
            for rep in range(grid.replicates):
                tasks.append((d, n, rep, derive_seed(grid.seed, d_idx, n_idx, rep)))
    return tasks


def run_experiment(grid: ExperimentGrid, model: GraphModelSpec, threads: int = 1,
                   progress: Optional[ProgressCallback] = None) -> ExperimentResult:
    """Runs every (d, n, replicate) task of the grid and collects spectral-norm errors.

    Replicates run concurrently when threads > 1; the result is ordered by
    (d, n, rep, estimator) regardless of completion order.
    """
    # every d of the grid must admit the template's group count
    for d in grid.d_values:
        GraphModelSpec.model_validate({**model.model_dump(), "d": d})

    # parallelism is spent on replicates, so each replicate solves its columns serially
    processor = ReplicateProcessor(grid, model)
    tasks = experiment_tasks(grid)
    total = len(tasks)
    logger.info(f"Running {model.kind} experiment: {total} replicates x {len(grid.estimators)} estimators")

    outcomes = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for done, outcome in enumerate(pool.map(processor.process_replicate, tasks), start=1):
                outcomes.append(outcome)
                if progress:
                    progress(done, total, f"Replicate {done}/{total}")
    else:
        for done, task in enumerate(tasks, start=1):
            outcomes.append(processor.process_replicate(task))
            if progress:
                progress(done, total, f"Replicate {done}/{total}")

    order = {name: i for i, name in enumerate(grid.estimators)}
    result = ExperimentResult()
    for records, failure in outcomes:
        result.records.extend(records)
        if failure is not None:
            result.failures.append(failure)
    result.records.sort(key=lambda r: (grid.d_values.index(r.d), grid.n_values.index(r.n), r.rep, order[r.estimator]))
    logger.info(f"Experiment finished: {len(result.records)} records, {len(result.failures)} failed replicates")
    return result


def records_frame(result: ExperimentResult) -> pd.DataFrame:
    """Tidy per-replicate table with the RECORD_COLUMNS layout."""
    return pd.DataFrame([r.model_dump() for r in result.records], columns=RECORD_COLUMNS)


def summary_frame(records: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of the spectral error per (kind, estimator, n, d)."""
    if records.empty:
        return pd.DataFrame(columns=["kind", "estimator", "n", "d", "n_over_logd", "replicates",
                                     "mean_error", "std_error"])
    grouped = records.groupby(["kind", "estimator", "n", "d"], sort=True)
    summary = grouped.agg(
        n_over_logd=("n_over_logd", "first"),
        replicates=("spectral_error", "size"),
        mean_error=("spectral_error", "mean"),
        std_error=("spectral_error", "std"),
    ).reset_index()
    return summary
