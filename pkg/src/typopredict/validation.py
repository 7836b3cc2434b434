"""Input validation helpers shared by the estimators."""

from __future__ import annotations

from .data import Dataset
from .errors import DataValidationError


def check_dataset(dataset, *, non_empty: bool = False, unmasked: bool = False) -> Dataset:
    """Validate that ``dataset`` is a Dataset and meets the stated requirements."""
    if not isinstance(dataset, Dataset):
        raise DataValidationError(f"expected a Dataset, got {type(dataset).__name__}")
    if non_empty and len(dataset) == 0:
        raise DataValidationError("dataset is empty")
    if unmasked and dataset.n_masked:
        raise DataValidationError("dataset must not contain masked cells")
    return dataset


def check_probability(x, name: str) -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DataValidationError(f"{name} must be in [0, 1], got {x}")
    return x


def check_positive_int(x, name: str) -> int:
    if int(x) != x or x < 1:
        raise DataValidationError(f"{name} must be a positive integer, got {x}")
    return int(x)
