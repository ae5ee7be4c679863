import argparse
import json
from typing import List, Optional, Union

from ..config import DEFAULT_OUTPUT_DIR, LOG_LEVEL, PROJECT_NAME, default_seed, resolve_threads
from ..exceptions import InputError
from ..models import RunConfig

CV = "cv"


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _penalty(text: str) -> Union[float, str]:
    """A fixed penalty, or the string 'cv' to cross-validate it."""
    if text.strip().lower() == "cv":
        return CV
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'cv', got '{text}'")


def _grid(text: str) -> Optional[List[float]]:
    if text.strip().lower() == "auto":
        return None
    return _float_list(text)


def _threads(text: str) -> int:
    try:
        return resolve_threads(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed (default STRUCTZERO_SEED)")
    sub.add_argument("--threads", type=_threads, default=None, help="worker count or 'auto'")
    sub.add_argument("--out", dest="out_dir", default=None, help="output directory")
    sub.add_argument("--config", dest="config_path", default=None,
                     help="JSON RunConfig file; explicit flags override its values")
    sub.add_argument("--log-level", default=None, help="logging level")
    sub.add_argument("--report-norms", action="store_true", default=None, help="record norm reports")


def _add_tuning(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--cv-folds", type=int, default=None, help="cross-validation folds (default 5)")
    sub.add_argument("--grid", type=_grid, default=None, help="comma-separated penalties or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROJECT_NAME,
        description="Sparse covariance and precision estimation for data with structural zeros.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    # simulate
    sim = subparsers.add_parser("simulate", help="band/cluster simulation: spectral errors vs n / log d")
    _add_common(sim)
    sim.add_argument("--kind", choices=["band", "cluster"], default=None)
    sim.add_argument("--n", dest="n_values", type=_int_list, default=None, help="sample sizes, e.g. 75,150,300")
    sim.add_argument("--d", dest="d_values", type=_int_list, default=None, help="dimensions, e.g. 25,50")
    sim.add_argument("--reps", dest="replicates", type=int, default=None)
    sim.add_argument("--estimators", type=_str_list, default=None,
                     help="subset of renorm_soft,renorm_hard,naive_soft,naive_hard,renorm_clime,naive_clime")
    sim.add_argument("--rho-range", dest="rho_range", type=_float_list, default=None,
                     help="missingness probability range lo,hi (default 0,0.75)")
    sim.add_argument("--off-diag", dest="off_diag_value", type=float, default=None)
    sim.add_argument("--groups", type=int, default=None, help="bandwidth or cluster count")
    sim.add_argument("--cv-folds", type=int, default=None)
    sim.add_argument("--exclude-diagonal", action="store_true", default=None,
                     help="leave covariance diagonals unthresholded")
    sim.add_argument("--prec-grid", dest="precision_grid", type=_grid, default=None,
                     help="lambda_omega candidates for the CLIME estimators or 'auto'")

    # estimate-cov
    cov = subparsers.add_parser("estimate-cov", help="thresholded renormalized covariance")
    _add_common(cov)
    _add_tuning(cov)
    cov.add_argument("--input", dest="input_path", required=False)
    cov.add_argument("--threshold", choices=["hard", "soft", "none"], default=None)
    cov.add_argument("--lambda", dest="lambda_value", type=_penalty, default=None, help="threshold or 'cv' (default cv)")
    cov.add_argument("--exclude-diagonal", action="store_true", default=None)
    cov.add_argument("--naive", action="store_true", default=None, help="treat structural zeros as zeros")
    cov.add_argument("--min-fraction", type=float, default=None, help="(A1) co-observation threshold")

    # estimate-prec
    prec = subparsers.add_parser("estimate-prec", help="CLIME precision matrix")
    _add_common(prec)
    _add_tuning(prec)
    prec.add_argument("--input", dest="input_path", required=False)
    prec.add_argument("--lambda-omega", dest="lambda_omega", type=_penalty, default=None, help="penalty or 'cv' (default cv)")
    prec.add_argument("--loss", dest="prec_loss", choices=["prec_trace", "prec_squared_trace"], default=None)
    prec.add_argument("--naive", action="store_true", default=None)
    prec.add_argument("--min-fraction", type=float, default=None)

    # ingest
    ing = subparsers.add_parser("ingest", help="log-ratio transform a taxa count table")
    _add_common(ing)
    ing.add_argument("--counts", dest="counts_path", required=False)
    ing.add_argument("--ref", dest="reference", default=None, help="reference taxon name or index")
    ing.add_argument("--group-column", default=None)
    ing.add_argument("--min-prevalence", type=float, default=None, help="taxa prevalence filter (default 0.2)")

    # classify
    cls = subparsers.add_parser("classify", help="two-group discriminant analysis on count data")
    _add_common(cls)
    _add_tuning(cls)
    cls.add_argument("--counts", dest="counts_path", required=False)
    cls.add_argument("--ref", dest="reference", default=None)
    cls.add_argument("--group-column", default=None)
    cls.add_argument("--min-prevalence", type=float, default=None)
    cls.add_argument("--classes", type=_str_list, default=None, help="two group labels, e.g. US,MA")
    cls.add_argument("--k", dest="k_values", type=_int_list, default=None, help="feature counts, e.g. 10,25,50")
    cls.add_argument("--estimator", dest="classifier_estimators", type=_str_list, default=None,
                     help="soft, hard, clime and/or sample")
    cls.add_argument("--repeats", type=int, default=None)
    cls.add_argument("--train-fraction", type=float, default=None)
    cls.add_argument("--pooled-t", action="store_true", default=None, help="pooled instead of Welch t test")
    cls.add_argument("--report-snr", action="store_true", default=None)
    return parser


def config_from_args(argv: Optional[List[str]] = None) -> RunConfig:
    """Parses the command line into a RunConfig, layered over --config when given."""
    args = build_parser().parse_args(argv)
    values = {key: value for key, value in vars(args).items() if value is not None}

    base = {}
    config_path = values.pop("config_path", None)
    if config_path:
        with open(config_path, mode="r", encoding="utf-8") as handle:
            base = json.load(handle)

    if "rho_range" in values:
        rho = values.pop("rho_range")
        if len(rho) != 2:
            raise InputError(f"--rho-range needs exactly two values lo,hi, got {rho}")
        values["rho_low"], values["rho_high"] = rho
    if values.pop("exclude_diagonal", False):
        values["include_diagonal"] = False
    if values.pop("naive", False):
        values["covariance"] = "naive"
    if values.pop("pooled_t", False):
        values["welch"] = False
    # None in RunConfig means "cross-validate"
    for key in ("lambda_value", "lambda_omega"):
        if values.get(key) == CV:
            values[key] = None

    merged = {
        "seed": default_seed(),
        "threads": resolve_threads(),
        "out_dir": DEFAULT_OUTPUT_DIR,
        "log_level": LOG_LEVEL,
        **base,
        **values,
    }
    return RunConfig(**merged)
