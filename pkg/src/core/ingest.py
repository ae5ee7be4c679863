import logging
from typing import List, Optional, Tuple, Union

import numpy as np

from ..exceptions import ReferenceTaxonError
from ..models import CountTable, MaskedDataset, ReferenceChoice

logger = logging.getLogger(__name__)

TaxonKey = Union[int, str]


def resolve_taxon(table: CountTable, key: TaxonKey) -> int:
    """Column index of a taxon given by name or index."""
    if isinstance(key, str):
        if key in table.taxa_names:
            return table.taxa_names.index(key)
        if not key.isdigit():
            raise ReferenceTaxonError(f"Reference taxon '{key}' is not a column of the count table")
    index = int(key)
    if not 0 <= index < len(table.taxa_names):
        raise ReferenceTaxonError(f"Reference index {index} out of range for {len(table.taxa_names)} taxa")
    return index


def prevalence_filter(table: CountTable, min_fraction: float,
                      reference: Optional[TaxonKey] = None) -> CountTable:
    """Keeps the taxa with a nonzero count in at least min_fraction of the samples.

    The reference taxon, when given, is always kept. Rows are untouched.
    """
    if not 0.0 < min_fraction <= 1.0:
        raise ValueError(f"min_fraction must lie in (0, 1], got {min_fraction}")
    prevalence = (table.counts > 0).mean(axis=0)
    keep = prevalence >= min_fraction - 1e-12
    if reference is not None:
        keep[resolve_taxon(table, reference)] = True
    dropped = [name for name, kept in zip(table.taxa_names, keep) if not kept]
    logger.info(f"Prevalence filter at {min_fraction:.3g}: kept {int(keep.sum())} of {len(keep)} taxa")
    if dropped:
        logger.debug(f"Dropped taxa: {dropped[:20]}{'...' if len(dropped) > 20 else ''}")
    return CountTable(
        counts=table.counts[:, keep],
        taxa_names=[name for name, kept in zip(table.taxa_names, keep) if kept],
        group_labels=table.group_labels,
    )


def validate_reference(table: CountTable, index: TaxonKey) -> ReferenceChoice:
    """Accepts the requested taxon as reference iff its count is positive in every row."""
    column = resolve_taxon(table, index)
    zero_rows = np.flatnonzero(table.counts[:, column] <= 0)
    name = table.taxa_names[column]
    if zero_rows.size:
        raise ReferenceTaxonError(
            f"Reference taxon '{name}' has a zero count at row {int(zero_rows[0])}"
            f" ({zero_rows.size} zero rows in total)",
            row=int(zero_rows[0]),
        )
    return ReferenceChoice(index=column, name=name)


def log_ratio_transform(table: CountTable, ref: ReferenceChoice) -> MaskedDataset:
    """X_ij = log(Z_ij / Z_i,ref) where Z_ij > 0, NA (mask 0) where Z_ij = 0.

    The reference column is dropped. Rows where only the reference is nonzero
    have no observed component and are dropped with a warning; the kept rows'
    original indices are carried in row_ids.
    """
    # 1. Reference must be positive everywhere
    reference_counts = table.counts[:, ref.index].astype(float)
    if np.any(reference_counts <= 0):
        raise ReferenceTaxonError(f"Reference taxon '{ref.name}' is not positive in every row",
                                  row=int(np.flatnonzero(reference_counts <= 0)[0]))
    # 2. Log ratios against the reference; zero counts become NA
    others = [j for j in range(table.counts.shape[1]) if j != ref.index]
    counts = table.counts[:, others].astype(float)
    present = counts > 0
    with np.errstate(divide="ignore"):
        ratios = np.where(present, np.log(counts / reference_counts[:, None]), np.nan)

    # 3. Rows left with only the reference are dropped
    kept_rows, dropped_rows = split_empty_rows(present)
    if dropped_rows:
        logger.warning(f"Dropping {len(dropped_rows)} rows with only the reference taxon present: "
                       f"{dropped_rows[:10]}{'...' if len(dropped_rows) > 10 else ''}")
    return MaskedDataset.from_values(
        ratios[kept_rows],
        component_names=[table.taxa_names[j] for j in others],
        row_ids=kept_rows,
    )


def split_empty_rows(present: np.ndarray) -> Tuple[List[int], List[int]]:
    """Partitions row indices into rows with at least one present entry and rows with none."""
    nonempty = present.any(axis=1)
    return np.flatnonzero(nonempty).tolist(), np.flatnonzero(~nonempty).tolist()


def default_reference(table: CountTable) -> ReferenceChoice:
    """First taxon, in column order, whose count is positive in every row."""
    positive = np.flatnonzero((table.counts > 0).all(axis=0))
    if positive.size == 0:
        raise ReferenceTaxonError("No taxon is present in every row; pass a reference explicitly")
    index = int(positive[0])
    logger.info(f"Using '{table.taxa_names[index]}' as reference taxon (first taxon present in every row)")
    return ReferenceChoice(index=index, name=table.taxa_names[index])
