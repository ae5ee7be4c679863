import numpy as np
import pytest

from src.core.ingest import (
    default_reference, log_ratio_transform, prevalence_filter, resolve_taxon, validate_reference,
)
from src.exceptions import ReferenceTaxonError
from src.models import CountTable, ReferenceChoice


def table(counts, names=None, groups=None):
    counts = np.asarray(counts)
    names = names or [f"t{j}" for j in range(counts.shape[1])]
    return CountTable(counts=counts, taxa_names=names, group_labels=groups)


def test_prevalence_filter_drops_rare_taxon():
    counts = np.ones((100, 3), dtype=int)
    counts[19:, 0] = 0  # t0 present in 19% of rows
    filtered = prevalence_filter(table(counts), 0.2)
    assert filtered.taxa_names == ["t1", "t2"]


def test_prevalence_filter_keeps_fully_present_table():
    counts = np.arange(1, 13).reshape(4, 3)
    filtered = prevalence_filter(table(counts), 0.2)
    np.testing.assert_array_equal(filtered.counts, counts)


def test_prevalence_filter_engineered_count():
    rng = np.random.default_rng(0)
    n, total, passing = 100, 500, 227
    counts = np.zeros((n, total), dtype=int)
    for j in range(total):
        present = 30 if j < passing else 10
        counts[rng.choice(n, present, replace=False), j] = rng.integers(1, 50, present)
    assert len(prevalence_filter(table(counts), 0.2).taxa_names) == 227


def test_prevalence_filter_keeps_reference():
    counts = np.ones((10, 2), dtype=int)
    counts[1:, 0] = 0
    filtered = prevalence_filter(table(counts, names=["ref", "other"]), 0.5, reference="ref")
    assert filtered.taxa_names == ["ref", "other"]


def test_validate_reference_accepts_positive_column():
    choice = validate_reference(table([[1, 2], [3, 4]]), 1)
    assert choice == ReferenceChoice(index=1, name="t1")


def test_validate_reference_reports_zero_row():
    counts = np.ones((10, 2), dtype=int)
    counts[7, 0] = 0
    with pytest.raises(ReferenceTaxonError) as info:
        validate_reference(table(counts), 0)
    assert info.value.row == 7
    assert "row 7" in str(info.value)


def test_requested_reference_wins_over_other_candidates():
    counts = np.ones((5, 3), dtype=int)
    assert validate_reference(table(counts), "t2").index == 2


def test_resolve_taxon_by_name_and_index():
    t = table([[1, 1, 1]], names=["a", "b", "c"])
    assert resolve_taxon(t, "b") == 1
    assert resolve_taxon(t, "2") == 2
    with pytest.raises(ReferenceTaxonError):
        resolve_taxon(t, "z")
    with pytest.raises(ReferenceTaxonError):
        resolve_taxon(t, 5)


def test_log_ratio_values_and_mask():
    t = table([[2, 4, 0], [4, 4, 1]], names=["a", "ref", "c"])
    data = log_ratio_transform(t, ReferenceChoice(index=1, name="ref"))
    assert data.component_names == ["a", "c"]
    assert data.values[0, 0] == pytest.approx(np.log(0.5))
    assert data.values[1, 0] == 0.0
    assert np.isnan(data.values[0, 1])
    np.testing.assert_array_equal(data.mask.entries, [[1, 0], [1, 1]])


def test_log_ratio_mask_equals_nonzero_indicator():
    rng = np.random.default_rng(4)
    counts = rng.integers(0, 4, size=(40, 6))
    counts[:, 0] = rng.integers(1, 9, size=40)
    counts[:, 1] = np.maximum(counts[:, 1], 1)
    data = log_ratio_transform(table(counts), ReferenceChoice(index=0, name="t0"))
    kept = data.row_ids
    np.testing.assert_array_equal(data.mask.entries, (counts[kept][:, 1:] > 0).astype(np.int8))


def test_log_ratio_drops_rows_with_only_reference(caplog):
    t = table([[3, 0], [3, 2]], names=["ref", "x"])
    data = log_ratio_transform(t, ReferenceChoice(index=0, name="ref"))
    assert data.n == 1
    assert data.row_ids == [1]
    assert "Dropping 1 rows" in caplog.text


def test_default_reference_picks_first_fully_present():
    t = table([[0, 1, 1], [1, 1, 2]])
    assert default_reference(t).name == "t1"
    with pytest.raises(ReferenceTaxonError):
        default_reference(table([[0, 1], [1, 0]]))
