import numpy as np
import pytest

from src.models import MaskedDataset, ObservationMask


def masked(values):
    """Dataset from a nested list where None marks a structural zero."""
    arr = np.array([[np.nan if v is None else v for v in row] for row in values], dtype=float)
    return MaskedDataset.from_values(arr)


def random_masked(rng: np.random.Generator, n: int, d: int, observe: float = 0.7) -> MaskedDataset:
    values = rng.standard_normal((n, d))
    entries = rng.random((n, d)) < observe
    entries[~entries.any(axis=1), 0] = True
    return MaskedDataset(values=values, mask=ObservationMask(entries=entries.astype(np.int8)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def write_csv(tmp_path):
    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
