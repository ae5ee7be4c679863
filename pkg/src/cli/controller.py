import itertools
import logging
import os
import platform
import time
from importlib import metadata
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ..config import PROJECT_NAME
from ..core.classify import evaluate, signal_to_noise, snr_survival
from ..core.clime import estimate_precision
from ..core.data_loader import DatasetLoader
from ..core.estimator import covariance_for
from ..core.experiment import records_frame, run_experiment, summary_frame
from ..core.exporter import Exporter
from ..core.ingest import (
    default_reference, log_ratio_transform, prevalence_filter, resolve_taxon, validate_reference,
)
from ..core.mask_model import check_a1, pairwise_counts
from ..core.metrics import norms, sparsity_class_stats
from ..core.simgen import gen_precision
from ..core.thresholding import apply_threshold
from ..core.tuning import cv_covariance, cv_precision
from ..exceptions import InputError, StructZeroError
from ..models import (
    CountTable, CvConfig, CvResult, ExperimentGrid, GraphModelSpec, MaskedDataset, RunConfig, ThresholdOperator,
)

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int, str], None]

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "pydantic", "python-dotenv")

REPORT_COLUMNS = ["pair", "class1", "class2", "estimator", "k", "class1_pct", "class2_pct", "overall_pct",
                  "repeats", "empty_test_rows"]


def exit_code_for(error: BaseException) -> int:
    """Maps an exception to the process exit status."""
    if isinstance(error, StructZeroError):
        return error.exit_code
    if isinstance(error, np.linalg.LinAlgError):
        return EXIT_NUMERICAL
    if isinstance(error, (ValueError, OSError)):
        return EXIT_INPUT
    return EXIT_FAILURE


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def _log_progress(current: int, total: int, message: str) -> None:
    logger.info(f"[{current}/{total}] {message}")


class RunController:
    """Runs one command-line subcommand end to end and writes its outputs plus a manifest."""

    def __init__(self, progress: Optional[ProgressCallback] = None):
        self.loader = DatasetLoader()
        self.exporter = Exporter()
        self.progress = progress or _log_progress
        self._outputs: List[str] = []
        self._details: Dict[str, Any] = {}

    def run(self, config: RunConfig) -> int:
        """Executes the pipeline for config.subcommand.

        Returns:
            The exit status: 0 on success, 2 input error, 3 numerical failure,
            4 infeasible precision program, 1 anything else.
        """
        pipelines = {
            "simulate": self._run_simulate,
            "estimate-cov": self._run_estimate_cov,
            "estimate-prec": self._run_estimate_prec,
            "ingest": self._run_ingest,
            "classify": self._run_classify,
        }
        self._outputs = []
        self._details = {}
        started = time.perf_counter()
        logger.info(f"Processing started: {config.subcommand} (seed={config.seed}, threads={config.threads})")
        try:
            os.makedirs(config.out_dir, exist_ok=True)
            pipelines[config.subcommand](config)
            self._write_manifest(config, time.perf_counter() - started)
        except Exception as e:
            code = exit_code_for(e)
            logger.error(f"{config.subcommand} failed ({type(e).__name__}, exit {code}): {e}")
            return code

        logger.info(f"Processing finished. Outputs in: {config.out_dir}")
        return EXIT_OK

    # --- Helpers ---

    def _path(self, config: RunConfig, filename: str) -> str:
        return os.path.join(config.out_dir, filename)

    def _save_frame(self, frame: pd.DataFrame, config: RunConfig, filename: str) -> str:
        path = self.exporter.save_frame(frame, self._path(config, filename))
        self._outputs.append(filename)
        return path

    def _write_manifest(self, config: RunConfig, wall_time: float) -> None:
        manifest = {
            "program": PROJECT_NAME,
            "subcommand": config.subcommand,
            "seed": config.seed,
            "config": config.model_dump(mode="json"),
            "versions": package_versions(),
            "wall_time_seconds": round(wall_time, 3),
            "outputs": sorted(self._outputs),
            **self._details,
        }
        self.exporter.save_json(manifest, self._path(config, "manifest.json"))

    def _tuning(self, config: RunConfig, loss_kind: str) -> CvConfig:
        return CvConfig(folds=config.cv_folds, grid=config.grid, loss_kind=loss_kind, seed=config.seed)

    def _load_input(self, config: RunConfig) -> MaskedDataset:
        if not config.input_path:
            raise InputError("--input is required")
        data = self.loader.load_dataset(config.input_path)
        report = check_a1(pairwise_counts(data.mask), config.min_fraction)
        self._details["a1_check"] = report.model_dump(mode="json")
        return data

    def _save_loss_curve(self, result: CvResult, config: RunConfig, filename: str) -> None:
        frame = pd.DataFrame({"penalty": result.penalties, "mean_loss": result.mean_losses})
        self._save_frame(frame, config, filename)
        self._details["cv"] = {"selected": result.selected, "loss_kind": result.loss_kind, "folds": config.cv_folds}

    # --- Pipelines ---

    def _run_simulate(self, config: RunConfig) -> None:
        grid = ExperimentGrid(
            n_values=config.n_values, d_values=config.d_values, replicates=config.replicates,
            estimators=config.estimators, seed=config.seed, rho_low=config.rho_low, rho_high=config.rho_high,
            cv_folds=config.cv_folds, include_diagonal=config.include_diagonal,
            precision_grid=config.precision_grid,
        )
        template = GraphModelSpec(kind=config.kind, d=max(config.d_values), groups=config.groups,
                                  off_diag_value=config.off_diag_value, seed=config.seed)

        # 1. Run every replicate
        result = run_experiment(grid, template, threads=config.threads, progress=self.progress)
        # 2. Save tables
        records = records_frame(result)
        self._save_frame(records, config, "results.csv")
        self._save_frame(summary_frame(records), config, "summary.csv")
        if result.failures:
            self._save_frame(pd.DataFrame([f.model_dump() for f in result.failures]), config, "failures.csv")
        self._details["experiment"] = {
            "total_models": grid.total_models,
            "records": len(result.records),
            "failed_replicates": len(result.failures),
        }

        if config.report_norms:
            rows = []
            for d in config.d_values:
                model = gen_precision(GraphModelSpec.model_validate({**template.model_dump(), "d": d}))
                omega_s, omega_m = sparsity_class_stats(model.omega, 0.0)
                sigma_s, sigma_m = sparsity_class_stats(model.sigma, 0.0)
                rows.append({"kind": config.kind, "d": d, "groups": model.spec.resolved_groups,
                             "omega_row_l0": omega_s, "omega_max_diag": omega_m,
                             "sigma_row_l0": sigma_s, "sigma_max_diag": sigma_m})
            self._save_frame(pd.DataFrame(rows), config, "models.csv")

    def _run_estimate_cov(self, config: RunConfig) -> None:
        self.progress(0, 3, "Loading dataset...")
        data = self._load_input(config)

        self.progress(1, 3, f"Estimating {config.covariance} covariance...")
        base = covariance_for(data, config.covariance)
        estimate = base
        lam: Optional[float] = None
        if config.threshold != "none":
            lam = config.lambda_value
            if lam is None:
                result = cv_covariance(data, config.threshold, self._tuning(config, "cov_frobenius"),
                                       method=config.covariance, include_diagonal=config.include_diagonal)
                self._save_loss_curve(result, config, "loss_curve.csv")
                lam = result.selected
            op = ThresholdOperator(kind=config.threshold, lam=lam, include_diagonal=config.include_diagonal)
            estimate = apply_threshold(base, op)

        self.progress(2, 3, "Saving covariance estimate...")
        self._save_matrix(estimate.sigma, data.names, config, "covariance.csv")
        self._details["covariance"] = {
            "method": config.covariance,
            "threshold": config.threshold,
            "lambda": lam,
            "include_diagonal": config.include_diagonal,
            "zeroed_pairs": [list(pair) for pair in estimate.zeroed_pairs],
        }
        if config.report_norms:
            self._details["norms"] = norms(estimate.sigma).model_dump()
        self.progress(3, 3, "Done")

    def _run_estimate_prec(self, config: RunConfig) -> None:
        self.progress(0, 3, "Loading dataset...")
        data = self._load_input(config)

        self.progress(1, 3, "Solving column programs...")
        lam = config.lambda_omega
        if lam is None:
            result = cv_precision(data, self._tuning(config, config.prec_loss), method=config.covariance,
                                  threads=config.threads)
            self._save_loss_curve(result, config, "loss_curve.csv")
            lam = result.selected
        precision = estimate_precision(covariance_for(data, config.covariance), lam, threads=config.threads)

        self.progress(2, 3, "Saving precision estimate...")
        path = self._save_matrix(precision.omega, data.names, config, "precision.csv")
        sidecar = {
            "lambda_omega": precision.lambda_omega,
            "feasibility_gap": precision.feasibility_gap,
            "iterations": precision.iterations,
            "covariance": config.covariance,
        }
        self.exporter.save_json(sidecar, self._path(config, "precision.meta.json"), sidecar_of=path)
        self._outputs.append("precision.meta.json")
        self._details["precision"] = sidecar
        if config.report_norms:
            self._details["norms"] = norms(precision.omega).model_dump()
        self.progress(3, 3, "Done")

    def _save_matrix(self, matrix: np.ndarray, names: List[str], config: RunConfig, filename: str) -> str:
        path = self.exporter.save_matrix(matrix, names, self._path(config, filename))
        self._outputs.append(filename)
        return path

    def _prepare_counts(self, config: RunConfig) -> Tuple[CountTable, MaskedDataset]:
        """Loads, prevalence-filters and log-ratio transforms the count table."""
        if not config.counts_path:
            raise InputError("--counts is required")
        # 1. Load and filter
        table = self.loader.load_count_table(config.counts_path, group_column=config.group_column)
        if config.reference is not None:
            # keep the reference by name; filtering shifts column indices
            name = table.taxa_names[resolve_taxon(table, config.reference)]
            filtered = prevalence_filter(table, config.min_prevalence, reference=name)
            reference = validate_reference(filtered, name)
        else:
            filtered = prevalence_filter(table, config.min_prevalence)
            reference = default_reference(filtered)
        # 2. Log-ratio transform
        data = log_ratio_transform(filtered, reference)
        self._details["ingest"] = {
            "reference": reference.name,
            "samples": table.n,
            "taxa_in": len(table.taxa_names),
            "taxa_kept": len(filtered.taxa_names),
            "rows_kept": data.n,
            "rows_dropped": table.n - data.n,
        }
        return filtered, data

    def _run_ingest(self, config: RunConfig) -> None:
        self.progress(0, 2, "Transforming count table...")
        filtered, data = self._prepare_counts(config)

        self.progress(1, 2, "Saving log-ratio dataset...")
        self.exporter.save_dataset(data.values, data.names, self._path(config, "logratio.csv"))
        self.exporter.save_mask(data.mask.entries, data.names, self._path(config, "mask.csv"))
        self._outputs.extend(["logratio.csv", "mask.csv"])
        self._save_frame(pd.DataFrame({"taxon": filtered.taxa_names}), config, "kept_taxa.csv")
        kept = set(data.row_ids or [])
        dropped = [i for i in range(filtered.n) if i not in kept]
        self._save_frame(pd.DataFrame({"row": dropped}, dtype=int), config, "dropped_rows.csv")
        self.progress(2, 2, "Done")

    def _class_pairs(self, config: RunConfig, labels: List[str]) -> List[Tuple[str, str]]:
        found = sorted(set(labels))
        if config.classes is not None:
            if len(config.classes) != 2:
                raise InputError(f"--classes needs exactly two labels, got {config.classes}")
            missing = [c for c in config.classes if c not in found]
            if missing:
                raise InputError(f"classes {missing} not found in column '{config.group_column}'")
            return [tuple(config.classes)]
        if len(found) < 2:
            raise InputError(f"column '{config.group_column}' needs at least two groups, found {found}")
        return list(itertools.combinations(found, 2))

    def _run_classify(self, config: RunConfig) -> None:
        filtered, data = self._prepare_counts(config)
        if filtered.group_labels is None:
            raise InputError(f"count table has no '{config.group_column}' column to classify by")
        # labels follow the rows that survived the transform
        labels = [filtered.group_labels[i] for i in data.row_ids]
        pairs = self._class_pairs(config, labels)
        k_values = [k for k in config.k_values if k <= data.d]
        for k in sorted(set(config.k_values) - set(k_values)):
            logger.warning(f"Skipping k={k}: only {data.d} log-ratio components available")
        if not k_values:
            raise InputError(f"no k value fits the {data.d} available components")

        total = len(pairs) * len(config.classifier_estimators) * len(k_values)
        step = 0
        report_rows = []
        snr_rows = []
        survival_rows = []
        for first, second in pairs:
            pair_label = f"{first} vs {second}"
            rows = [i for i, label in enumerate(labels) if label in (first, second)]
            subset = data.take(rows=rows)
            subset_labels = [labels[i] for i in rows]

            for estimator in config.classifier_estimators:
                for k in k_values:
                    step += 1
                    self.progress(step, total, f"{pair_label}: {estimator}, k={k}")
                    report = evaluate(
                        subset, subset_labels, k, estimator, repeats=config.repeats,
                        train_fraction=config.train_fraction, seed=config.seed,
                        tuning=self._tuning(config, "prec_trace" if estimator == "clime" else "cov_frobenius"),
                        classes=(first, second), welch=config.welch, threads=config.threads,
                    )
                    report_rows.append({
                        "pair": pair_label, "class1": first, "class2": second, "estimator": estimator, "k": k,
                        "class1_pct": report.class1_pct, "class2_pct": report.class2_pct,
                        "overall_pct": report.overall_pct, "repeats": report.repeats,
                        "empty_test_rows": sum(o.empty_test_rows for o in report.per_repeat),
                    })

            if config.report_snr:
                ratios = signal_to_noise(subset, subset_labels, classes=(first, second))
                snr_rows.extend({"pair": pair_label, "component": name, "snr": value}
                                for name, value in zip(subset.names, ratios))
                thresholds, survival = snr_survival(ratios)
                survival_rows.extend({"pair": pair_label, "abs_snr": t, "survival": s}
                                     for t, s in zip(thresholds, survival))

        self._save_frame(pd.DataFrame(report_rows, columns=REPORT_COLUMNS), config, "classification.csv")
        if config.report_snr:
            self._save_frame(pd.DataFrame(snr_rows, columns=["pair", "component", "snr"]), config, "snr.csv")
            self._save_frame(pd.DataFrame(survival_rows, columns=["pair", "abs_snr", "survival"]), config,
                             "snr_survival.csv")
        self._details["classification"] = {"pairs": [list(p) for p in pairs], "k_values": k_values}
