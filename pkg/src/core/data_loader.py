import csv
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from ..exceptions import MalformedCsvError
from ..models import CountTable, MaskedDataset

logger = logging.getLogger(__name__)

NA_TOKEN = "NA"


class DatasetLoader:
    """Reads the CSV inputs: masked datasets, masks and taxa count tables."""

    def __init__(self, na_token: str = NA_TOKEN):
        self.na_token = na_token

    def _read_rows(self, path: str) -> Tuple[List[str], List[Tuple[int, List[str]]]]:
        """Returns the header and the (line number, cells) of every non-blank body row."""
        try:
            with open(path, mode="r", encoding="utf-8-sig", newline="") as csvfile:
                reader = csv.reader(csvfile)
                header = next(reader, None)
                if not header:
                    raise MalformedCsvError(path, 1, "file is empty or has no header row")
                header = [name.strip() for name in header]
                rows = []
                for line, row in enumerate(reader, start=2):
                    if not row or all(not cell.strip() for cell in row):
                        continue
                    if len(row) != len(header):
                        raise MalformedCsvError(path, line, f"expected {len(header)} cells, found {len(row)}")
                    rows.append((line, [cell.strip() for cell in row]))
        except FileNotFoundError as e:
            raise MalformedCsvError(path, 0, "file not found") from e
        if len(set(header)) != len(header):
            raise MalformedCsvError(path, 1, "duplicate column names in header")
        return header, rows

    def _parse_real(self, path: str, line: int, column: str, cell: str) -> float:
        if cell == self.na_token:
            return math.nan
        try:
            value = float(cell)
        except ValueError:
            raise MalformedCsvError(path, line, f"non-numeric cell '{cell}'", column=column)
        if not math.isfinite(value):
            raise MalformedCsvError(path, line, f"non-finite cell '{cell}' (use {self.na_token} for structural zeros)",
                                    column=column)
        return value

    def load_dataset(self, path: str) -> MaskedDataset:
        """Loads a real-valued CSV whose NA tokens mark structural zeros."""
        header, rows = self._read_rows(path)
        values = np.array(
            [[self._parse_real(path, line, header[j], cell) for j, cell in enumerate(cells)] for line, cells in rows],
            dtype=float,
        ).reshape(len(rows), len(header))
        empty = [line for (line, _), row in zip(rows, values) if np.all(np.isnan(row))]
        if empty:
            raise MalformedCsvError(path, empty[0], "row has no observed component")
        logger.info(f"Loaded dataset '{path}': {values.shape[0]} rows, {values.shape[1]} components, "
                    f"{int(np.isnan(values).sum())} structural zeros")
        return MaskedDataset.from_values(values, component_names=header)

    def load_count_table(self, path: str, group_column: Optional[str] = "group") -> CountTable:
        """Loads integer taxa counts; an optional group column carries row labels."""
        header, rows = self._read_rows(path)
        group_index = header.index(group_column) if group_column and group_column in header else None
        taxa = [name for j, name in enumerate(header) if j != group_index]
        counts = []
        groups = []
        for line, cells in rows:
            row = []
            for j, cell in enumerate(cells):
                if j == group_index:
                    groups.append(cell)
                    continue
                try:
                    value = int(cell)
                except ValueError:
                    raise MalformedCsvError(path, line, f"count '{cell}' is not an integer", column=header[j])
                if value < 0:
                    raise MalformedCsvError(path, line, f"negative count {value}", column=header[j])
                row.append(value)
            counts.append(row)
        logger.info(f"Loaded count table '{path}': {len(rows)} samples, {len(taxa)} taxa"
                    + (f", groups from column '{group_column}'" if group_index is not None else ""))
        return CountTable(
            counts=np.array(counts, dtype=np.int64).reshape(len(rows), len(taxa)),
            taxa_names=taxa,
            group_labels=groups if group_index is not None else None,
        )
