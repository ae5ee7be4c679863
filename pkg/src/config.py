import logging
import os
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

PROJECT_NAME = "structzero"

# --- Run defaults ---
DEFAULT_SEED = os.getenv("STRUCTZERO_SEED", "0")
DEFAULT_THREADS = os.getenv("STRUCTZERO_THREADS", "1")
DEFAULT_OUTPUT_DIR = os.getenv("STRUCTZERO_OUTPUT_DIR", "results")
LOG_LEVEL = os.getenv("STRUCTZERO_LOG_LEVEL", "INFO")

# --- Numerical tolerances ---
L0_TOLERANCE = os.getenv("STRUCTZERO_L0_TOLERANCE", "1e-12")
LP_TOLERANCE = os.getenv("STRUCTZERO_LP_TOLERANCE", "1e-10")
FEASIBILITY_SLACK = os.getenv("STRUCTZERO_FEASIBILITY_SLACK", "1e-8")

LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


def _as_float(raw: str, fallback: float) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        return fallback


def resolve_threads(value: Optional[str] = None) -> int:
    """Turns a thread setting ("auto" or a positive integer) into a worker count."""
    raw = (value if value is not None else DEFAULT_THREADS).strip().lower()
    if raw == "auto":
        return os.cpu_count() or 1
    threads = int(raw)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def default_seed() -> int:
    return int(DEFAULT_SEED)


def l0_tolerance() -> float:
    return _as_float(L0_TOLERANCE, 1e-12)


def lp_tolerance() -> float:
    return _as_float(LP_TOLERANCE, 1e-10)


def feasibility_slack() -> float:
    return _as_float(FEASIBILITY_SLACK, 1e-8)


def configure_logging(level: Optional[str] = None) -> None:
    """Configures root logging once for the process."""
    resolved = (level or LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, resolved, logging.INFO), format=LOG_FORMAT)


# --- Validation ---
def validate_config() -> List[str]:
    """Checks that every configured value parses and is in range.

    Returns:
        A list of human-readable problems; empty when the configuration is usable.
    """
    problems: List[str] = []

    try:
        if int(DEFAULT_SEED) < 0:
            problems.append(f"STRUCTZERO_SEED must be non-negative, got {DEFAULT_SEED}")
    except ValueError:
        problems.append(f"STRUCTZERO_SEED is not an integer: '{DEFAULT_SEED}'")

    try:
        resolve_threads()
    except ValueError:
        problems.append(f"STRUCTZERO_THREADS must be 'auto' or a positive integer, got '{DEFAULT_THREADS}'")

    if LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        problems.append(f"STRUCTZERO_LOG_LEVEL is not a logging level: '{LOG_LEVEL}'")

    for name, raw in (("STRUCTZERO_L0_TOLERANCE", L0_TOLERANCE),
                      ("STRUCTZERO_LP_TOLERANCE", LP_TOLERANCE),
                      ("STRUCTZERO_FEASIBILITY_SLACK", FEASIBILITY_SLACK)):
        try:
            if float(raw) <= 0:
                problems.append(f"{name} must be positive, got {raw}")
        except ValueError:
            problems.append(f"{name} is not a number: '{raw}'")

    return problems
