"""Language datasets: parsing, serialization, masking and merging.

File format
-----------
Tab-separated, UTF-8, Unix newlines, with the fixed header::

    wals_code  name  latitude  longitude  genus  family  countrycodes  features

``countrycodes`` holds space-separated 2-letter codes.  ``features`` holds
``|``-separated ``name=value`` entries; the literal value ``?`` marks a cell
whose value is hidden and has to be predicted.  A feature that is not listed
is absent (unknown, and not asked about).  Feature names are the full strings
including their id prefix, e.g. ``81A Order of Subject, Object and Verb``.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DataValidationError

logger = logging.getLogger(__name__)

HEADER = (
    "wals_code",
    "name",
    "latitude",
    "longitude",
    "genus",
    "family",
    "countrycodes",
    "features",
)

#: The always-known per-language properties; never masked, never predicted.
GENERAL_PROPERTIES = HEADER[:7]

MASK_SENTINEL = "?"


class CellState(Enum):
    KNOWN = "known"
    MASKED = "masked"
    ABSENT = "absent"


class Role(Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"
    MERGED = "merged"


@dataclass(frozen=True)
class FeatureCell:
    """One feature slot of one language: a known value, masked, or absent."""

    state: CellState
    value: str = ""

    def __post_init__(self):
        if (self.state is CellState.KNOWN) != bool(self.value):
            raise DataValidationError(
                "cell value must be non-empty exactly when the state is KNOWN"
            )

    @classmethod
    def known(cls, value: str) -> "FeatureCell":
        return cls(CellState.KNOWN, value)

    @classmethod
    def masked(cls) -> "FeatureCell":
        return cls(CellState.MASKED)

    @property
    def is_known(self) -> bool:
        return self.state is CellState.KNOWN

    @property
    def is_masked(self) -> bool:
        return self.state is CellState.MASKED


#: Shared cell returned for features a record does not list.
ABSENT_CELL = FeatureCell(CellState.ABSENT)


@dataclass(frozen=True)
class LanguageRecord:
    """One language: the 7 general properties plus its linguistic feature cells.

    ``features`` only stores KNOWN and MASKED cells; anything else is absent.
    Records are immutable after construction.
    """

    wals_code: str
    name: str
    latitude: float
    longitude: float
    genus: str
    family: str
    country_codes: frozenset[str]
    features: dict[str, FeatureCell] = field(default_factory=dict)

    def __post_init__(self):
        if not self.wals_code:
            raise DataValidationError("wals_code must be non-empty")
        if not -90.0 <= self.latitude <= 90.0:
            raise DataValidationError(
                f"{self.wals_code}: latitude {self.latitude} outside [-90, 90]"
            )
        if not -180.0 <= self.longitude <= 180.0:
            raise DataValidationError(
                f"{self.wals_code}: longitude {self.longitude} outside [-180, 180]"
            )
        for code in self.country_codes:
            if len(code) != 2:
                raise DataValidationError(
                    f"{self.wals_code}: country code {code!r} is not 2 letters"
                )
        for name, cell in self.features.items():
            if cell.state is CellState.ABSENT:
                raise DataValidationError(
                    f"{self.wals_code}: absent cell stored explicitly for {name!r}"
                )

    def cell(self, feature: str) -> FeatureCell:
        return self.features.get(feature, ABSENT_CELL)

    def known_features(self):
        """Yield ``(feature, value)`` for every KNOWN linguistic cell."""
        for name, cell in self.features.items():
            if cell.is_known:
                yield name, cell.value

    def masked_features(self):
        """Yield the names of MASKED cells."""
        for name, cell in self.features.items():
            if cell.is_masked:
                yield name

    @property
    def n_known(self) -> int:
        return sum(1 for c in self.features.values() if c.is_known)

    @property
    def n_masked(self) -> int:
        return sum(1 for c in self.features.values() if c.is_masked)

    def replace_features(self, features: dict[str, FeatureCell]) -> "LanguageRecord":
        """Copy of this record with a different feature map."""
        return LanguageRecord(
            wals_code=self.wals_code,
            name=self.name,
            latitude=self.latitude,
            longitude=self.longitude,
            genus=self.genus,
            family=self.family,
            country_codes=self.country_codes,
            features=features,
        )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of language records with a split role."""

    records: tuple[LanguageRecord, ...]
    role: Role = Role.TRAIN

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.wals_code in seen:
                raise DataValidationError(f"duplicate wals_code {rec.wals_code!r}")
            seen.add(rec.wals_code)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @cached_property
    def by_code(self) -> dict[str, LanguageRecord]:
        return {rec.wals_code: rec for rec in self.records}

    @cached_property
    def feature_vocab(self) -> dict[str, frozenset[str]]:
        """Feature name -> set of values observed in KNOWN cells."""
        vocab: dict[str, set[str]] = {}
        for rec in self.records:
            for name, value in rec.known_features():
                vocab.setdefault(name, set()).add(value)
        return {name: frozenset(values) for name, values in vocab.items()}

    def masked_cells(self):
        """Yield ``(wals_code, feature)`` for every MASKED cell, in record order."""
        for rec in self.records:
            for name in rec.masked_features():
                yield rec.wals_code, name

    @property
    def n_masked(self) -> int:
        return sum(rec.n_masked for rec in self.records)

    @property
    def n_known(self) -> int:
        return sum(rec.n_known for rec in self.records)


def value_counts(dataset: Dataset) -> dict[str, Counter]:
    """Per-feature value counts over KNOWN cells."""
    counts: dict[str, Counter] = {}
    for rec in dataset:
        for name, value in rec.known_features():
            counts.setdefault(name, Counter())[value] += 1
    return counts


def most_frequent(counter: Counter) -> str:
    """Most frequent value; count ties break to the lexicographically smallest."""
    if not counter:
        raise DataValidationError("cannot take the mode of an empty counter")
    return min(counter, key=lambda v: (-counter[v], v))


# ---------------------------------------------------------------------------
# Parsing / serialization


def _parse_features(column: str, where: str) -> dict[str, FeatureCell]:
    features: dict[str, FeatureCell] = {}
    if not column:
        return features
    for entry in column.split("|"):
        name, sep, value = entry.partition("=")
        if not sep or not name:
            raise DataFormatError(f"{where}: malformed feature entry {entry!r}")
        if name in features:
            raise DataFormatError(f"{where}: duplicate feature {name!r}")
        if value == MASK_SENTINEL:
            features[name] = FeatureCell.masked()
        elif value:
            features[name] = FeatureCell.known(value)
        else:
            raise DataFormatError(f"{where}: empty value for feature {name!r}")
    return features


def parse_dataset(path, role: Role = Role.TRAIN) -> Dataset:
    """Read a dataset file in the TSV format described in the module docstring.

    Raises ``DataFormatError`` (with the line number) for malformed rows and
    ``DataValidationError`` for well-formed rows that violate an invariant,
    e.g. an out-of-range coordinate or a duplicate wals_code.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or tuple(lines[0].split("\t")) != HEADER:
        raise DataFormatError(f"{path}:1: expected header {' '.join(HEADER)!r}")

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        where = f"{path}:{lineno}"
        cols = line.split("\t")
        if len(cols) != len(HEADER):
            raise DataFormatError(
                f"{where}: expected {len(HEADER)} tab-separated columns, got {len(cols)}"
            )
        code, name, lat_s, lon_s, genus, family, countries_s, features_s = cols
        try:
            latitude = float(lat_s)
            longitude = float(lon_s)
        except ValueError:
            raise DataFormatError(f"{where}: non-numeric coordinate") from None
        try:
            records.append(
                LanguageRecord(
                    wals_code=code,
                    name=name,
                    latitude=latitude,
                    longitude=longitude,
                    genus=genus,
                    family=family,
                    country_codes=frozenset(countries_s.split()) if countries_s else frozenset(),
                    features=_parse_features(features_s, where),
                )
            )
        except DataValidationError as err:
            raise DataValidationError(f"{where}: {err}") from None
    return Dataset(tuple(records), role)


def _format_float(x: float) -> str:
    return repr(float(x))


def _check_writable_text(text: str, what: str, where: str) -> str:
    if "\t" in text or "\n" in text or "\r" in text:
        raise DataValidationError(f"{where}: {what} contains a tab or newline")
    return text


def serialize_dataset(dataset: Dataset, path) -> None:
    """Write a dataset in the TSV format; ``parse_dataset`` inverts it exactly."""
    path = Path(path)
    out = ["\t".join(HEADER)]
    for rec in dataset:
        where = rec.wals_code
        entries = []
        for name, cell in rec.features.items():
            _check_writable_text(name, "feature name", where)
            if "=" in name or "|" in name:
                raise DataValidationError(f"{where}: feature name {name!r} contains '=' or '|'")
            if cell.is_known:
                _check_writable_text(cell.value, "feature value", where)
                if "|" in cell.value:
                    raise DataValidationError(f"{where}: value {cell.value!r} contains '|'")
                entries.append(f"{name}={cell.value}")
            else:
                entries.append(f"{name}={MASK_SENTINEL}")
        row = (
            _check_writable_text(rec.wals_code, "wals_code", where),
            _check_writable_text(rec.name, "name", where),
            _format_float(rec.latitude),
            _format_float(rec.longitude),
            _check_writable_text(rec.genus, "genus", where),
            _check_writable_text(rec.family, "family", where),
            " ".join(sorted(rec.country_codes)),
            "|".join(entries),
        )
        out.append("\t".join(row))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Masking / merging


def mask_split(dataset: Dataset, rate: float, seed: int) -> Dataset:
    """Hide a random ``rate`` fraction of the KNOWN linguistic cells.

    Each KNOWN cell is independently turned into a MASKED cell with
    probability ``rate``.  The 7 general properties are never touched.  After
    the random pass, every language with at least two KNOWN cells is adjusted
    so that at least one cell stays known and at least one is masked; the
    adjustment is skipped entirely when the random pass selected no cell at
    all (degenerate rates).  Deterministic for a fixed seed.
    """
    if not 0.0 < rate < 1.0:
        raise DataValidationError(f"mask rate must be in (0, 1), got {rate}")
    for rec in dataset:
        if any(cell.is_masked for cell in rec.features.values()):
            raise DataValidationError(
                f"{rec.wals_code}: dataset already contains masked cells"
            )

    rng = np.random.default_rng(seed)
    selections: list[list[str]] = []
    total_selected = 0
    for rec in dataset:
        chosen = [name for name, _ in rec.known_features() if rng.random() < rate]
        selections.append(chosen)
        total_selected += len(chosen)

    if total_selected == 0:
        logger.warning("mask_split: rate %g selected no cell; dataset unchanged", rate)
        return Dataset(dataset.records, dataset.role)

    new_records = []
    for rec, chosen in zip(dataset.records, selections):
        known = [name for name, _ in rec.known_features()]
        if not known:
            logger.warning("mask_split: %s has no known linguistic cell", rec.wals_code)
            new_records.append(rec)
            continue
        if len(known) >= 2:
            if len(chosen) == len(known):
                # everything got masked: keep one cell visible
                keep = chosen[int(rng.integers(len(chosen)))]
                chosen = [name for name in chosen if name != keep]
            elif not chosen:
                # nothing got masked: hide one cell
                chosen = [known[int(rng.integers(len(known)))]]
        mask_set = set(chosen)
        features = {
            name: (FeatureCell.masked() if name in mask_set else cell)
            for name, cell in rec.features.items()
        }
        new_records.append(rec.replace_features(features))
    return Dataset(tuple(new_records), dataset.role)


def merge_visible(train: Dataset, other: Dataset) -> Dataset:
    """Append ``other``'s records to ``train``; masked cells stay masked.

    Model fitting must treat MASKED cells as unknown, so merging exposes only
    the visible part of ``other`` to training while keeping its prediction
    targets in place.
    """
    overlap = {rec.wals_code for rec in train} & {rec.wals_code for rec in other}
    if overlap:
        sample = ", ".join(sorted(overlap)[:5])
        raise DataValidationError(f"wals_code collision between datasets: {sample}")
    return Dataset(train.records + other.records, Role.MERGED)
