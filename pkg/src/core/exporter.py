import json
import logging
import os
import tempfile
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class Exporter:
    """Writes result files atomically: write to a temp file, then rename over the target."""

    def _atomic_write(self, output_path: str, text: str) -> None:
        directory = os.path.dirname(os.path.abspath(output_path))
        os.makedirs(directory, exist_ok=True)
        fd, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(output_path))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(temp_path, output_path)
        except Exception:
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise

    def save_frame(self, frame: pd.DataFrame, output_path: str) -> str:
        """Saves a table as CSV with full-precision floats."""
        self._atomic_write(output_path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
        logger.info(f"Saved {len(frame)} rows to: {output_path}")
        return output_path

    def save_matrix(self, matrix: np.ndarray, names: List[str], output_path: str) -> str:
        """Saves a dense matrix with a header row of component names."""
        return self.save_frame(pd.DataFrame(np.asarray(matrix, dtype=float), columns=names), output_path)

    def save_dataset(self, values: np.ndarray, names: List[str], output_path: str, na_token: str = "NA") -> str:
        """Saves a masked dataset, writing structural zeros as the NA token."""
        frame = pd.DataFrame(np.asarray(values, dtype=float), columns=names)
        self._atomic_write(output_path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep=na_token,
                                                     lineterminator="\n"))
        logger.info(f"Saved dataset ({frame.shape[0]} x {frame.shape[1]}) to: {output_path}")
        return output_path

    def save_mask(self, entries: np.ndarray, names: List[str], output_path: str) -> str:
        frame = pd.DataFrame(np.asarray(entries, dtype=int), columns=names)
        self._atomic_write(output_path, frame.to_csv(index=False, lineterminator="\n"))
        logger.info(f"Saved mask ({frame.shape[0]} x {frame.shape[1]}) to: {output_path}")
        return output_path

    def save_json(self, payload: Dict[str, Any], output_path: str, sidecar_of: Optional[str] = None) -> str:
        """Saves a JSON document (manifest or metadata sidecar) with sorted keys."""
        self._atomic_write(output_path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
        logger.info(f"Saved {'metadata for ' + sidecar_of if sidecar_of else 'JSON'} to: {output_path}")
        return output_path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
