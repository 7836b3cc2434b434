"""Scoring of masked-cell predictions against gold data.

A prediction is correct when it matches the gold value exactly after
whitespace normalization; a cell with no prediction counts as wrong.  The
evaluated cells are, by default, the prediction cells the gold data knows;
passing the masked dataset instead scores every masked cell, so systems are
punished for cells they declined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .base import TypologyPredictor
from .data import Dataset, LanguageRecord, most_frequent, value_counts
from .errors import DataValidationError
from .predictions import PredictionMap, ScoredPrediction, System
from .validation import check_dataset


def normalize_value(value: str) -> str:
    """Collapse all runs of whitespace to single spaces and strip the ends."""
    return " ".join(value.split())


def _evaluated_cells(
    gold: Dataset, predictions: PredictionMap, masked: Dataset | None
) -> list[tuple[str, str]]:
    by_code = gold.by_code
    if masked is None:
        return [
            (code, feature)
            for code, feature in predictions
            if code in by_code and by_code[code].cell(feature).is_known
        ]
    cells = []
    for code, feature in masked.masked_cells():
        if code not in by_code:
            continue
        if not by_code[code].cell(feature).is_known:
            raise DataValidationError(
                f"masked cell ({code}, {feature}) has no gold value to score against"
            )
        cells.append((code, feature))
    return cells


def _is_correct(gold: Dataset, predictions: PredictionMap, cell: tuple[str, str]) -> bool:
    prediction = predictions.get(cell)
    if prediction is None:
        return False
    code, feature = cell
    gold_value = gold.by_code[code].cell(feature).value
    return normalize_value(prediction.value) == normalize_value(gold_value)


@dataclass(frozen=True)
class GroupStats:
    total: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_json_dict(self) -> dict:
        return {"total": self.total, "correct": self.correct, "accuracy": self.accuracy}


@dataclass(frozen=True)
class EvalReport:
    system: str
    overall: GroupStats
    by_feature: dict[str, GroupStats] = field(default_factory=dict)
    by_language: dict[str, GroupStats] = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.overall.accuracy

    def to_json_dict(self) -> dict:
        return {
            "system": self.system,
            "overall": self.overall.to_json_dict(),
            "by_feature": {f: s.to_json_dict() for f, s in sorted(self.by_feature.items())},
            "by_language": {c: s.to_json_dict() for c, s in sorted(self.by_language.items())},
        }

    def format_text(self) -> str:
        s = self.overall
        return (
            f"{self.system}: {100.0 * s.accuracy:.2f}% "
            f"({s.correct}/{s.total} masked cells correct)"
        )


def evaluate_predictions(
    gold: Dataset,
    predictions: PredictionMap,
    masked: Dataset | None = None,
    system: str | None = None,
) -> EvalReport:
    """Full per-feature / per-language accuracy breakdown for one system."""
    check_dataset(gold)
    cells = _evaluated_cells(gold, predictions, masked)
    by_feature: dict[str, list[bool]] = {}
    by_language: dict[str, list[bool]] = {}
    n_correct = 0
    for cell in cells:
        ok = _is_correct(gold, predictions, cell)
        n_correct += ok
        code, feature = cell
        by_feature.setdefault(feature, []).append(ok)
        by_language.setdefault(code, []).append(ok)
    if system is None:
        systems = {p.system.value for p in predictions.values()}
        system = systems.pop() if len(systems) == 1 else "mixed"
    return EvalReport(
        system=system,
        overall=GroupStats(total=len(cells), correct=n_correct),
        by_feature={f: GroupStats(len(v), sum(v)) for f, v in by_feature.items()},
        by_language={c: GroupStats(len(v), sum(v)) for c, v in by_language.items()},
    )


def accuracy(gold: Dataset, predictions: PredictionMap, masked: Dataset | None = None) -> float:
    """Fraction of evaluated cells predicted correctly."""
    cells = _evaluated_cells(gold, predictions, masked)
    if not cells:
        return 0.0
    return sum(_is_correct(gold, predictions, cell) for cell in cells) / len(cells)


def write_report(report: "EvalReport", path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Majority baseline


class MostFrequentBaseline(TypologyPredictor):
    """Predict every feature's globally most frequent value.

    Ties go to the lexicographically smallest value; the score is the value's
    share among the feature's known cells.
    """

    def fit(self, dataset: Dataset) -> "MostFrequentBaseline":
        check_dataset(dataset, non_empty=True)
        self.modes_ = {}
        for feature, counts in value_counts(dataset).items():
            if counts:
                value = most_frequent(counts)
                self.modes_[feature] = (value, counts[value] / sum(counts.values()))
        return self

    def _predict_cell(self, record: LanguageRecord, feature: str) -> ScoredPrediction | None:
        entry = self.modes_.get(feature)
        if entry is None:
            return None
        value, share = entry
        return ScoredPrediction(
            feature=feature, value=value, score=share, system=System.BASELINE
        )


def baseline_predict(train: Dataset, dataset: Dataset) -> PredictionMap:
    return MostFrequentBaseline().fit(train).predict(dataset)


# ---------------------------------------------------------------------------
# Where two systems disagree


def confidence_quartiles(
    scored: list[tuple[float, bool]]
) -> tuple[GroupStats, GroupStats, GroupStats, GroupStats]:
    """Accuracy within four equal rank bands of descending confidence.

    Ranks, not score thresholds, define the bands, so heavily tied scores
    still split into four near-equal groups (sizes differ by at most one).
    """
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][0], i))
    bands = np.array_split(np.array(order, dtype=int), 4)
    stats = []
    for band in bands:
        outcomes = [scored[i][1] for i in band]
        stats.append(GroupStats(total=len(outcomes), correct=sum(outcomes)))
    return tuple(stats)


@dataclass(frozen=True)
class DisagreementReport:
    """How two systems divide the cells where exactly one of them is right."""

    system_a: str
    system_b: str
    n_cells: int
    n_exactly_one: int
    a_only: int
    b_only: int
    quartiles_a: tuple[GroupStats, ...]
    quartiles_b: tuple[GroupStats, ...]

    @property
    def exactly_one_share(self) -> float:
        return self.n_exactly_one / self.n_cells if self.n_cells else 0.0

    @property
    def a_share(self) -> float:
        return self.a_only / self.n_exactly_one if self.n_exactly_one else 0.0

    @property
    def b_share(self) -> float:
        return self.b_only / self.n_exactly_one if self.n_exactly_one else 0.0

    def to_json_dict(self) -> dict:
        return {
            "system_a": self.system_a,
            "system_b": self.system_b,
            "n_cells": self.n_cells,
            "n_exactly_one": self.n_exactly_one,
            "exactly_one_share": self.exactly_one_share,
            "a_only": self.a_only,
            "b_only": self.b_only,
            "a_share": self.a_share,
            "b_share": self.b_share,
            "quartiles_a": [s.to_json_dict() for s in self.quartiles_a],
            "quartiles_b": [s.to_json_dict() for s in self.quartiles_b],
        }

    def format_text(self) -> str:
        lines = [
            f"cells evaluated: {self.n_cells}",
            (
                f"exactly one system correct: {self.n_exactly_one} "
                f"({100.0 * self.exactly_one_share:.1f}% of cells)"
            ),
            (
                f"  only {self.system_a} correct: {self.a_only} "
                f"({100.0 * self.a_share:.1f}% of disagreements)"
            ),
            (
                f"  only {self.system_b} correct: {self.b_only} "
                f"({100.0 * self.b_share:.1f}% of disagreements)"
            ),
        ]
        for name, quartiles in (
            (self.system_a, self.quartiles_a),
            (self.system_b, self.quartiles_b),
        ):
            bands = ", ".join(
                f"Q{i + 1} {100.0 * s.accuracy:.1f}%" for i, s in enumerate(quartiles)
            )
            lines.append(f"accuracy by confidence quartile ({name}): {bands}")
        return "\n".join(lines)


def disagreement_report(
    gold: Dataset,
    predictions_a: PredictionMap,
    predictions_b: PredictionMap,
    masked: Dataset | None = None,
    system_a: str | None = None,
    system_b: str | None = None,
) -> DisagreementReport:
    """Compare two prediction maps cell by cell against gold."""

    def _label(preds: PredictionMap, default: str) -> str:
        systems = {p.system.value for p in preds.values()}
        return systems.pop() if len(systems) == 1 else default

    if masked is None:
        cells = sorted(
            set(_evaluated_cells(gold, predictions_a, None))
            | set(_evaluated_cells(gold, predictions_b, None))
        )
    else:
        cells = _evaluated_cells(gold, predictions_a, masked)
    a_only = b_only = exactly_one = 0
    scored_a: list[tuple[float, bool]] = []
    scored_b: list[tuple[float, bool]] = []
    for cell in cells:
        ok_a = _is_correct(gold, predictions_a, cell)
        ok_b = _is_correct(gold, predictions_b, cell)
        if ok_a != ok_b:
            exactly_one += 1
            a_only += ok_a
            b_only += ok_b
        if cell in predictions_a:
            scored_a.append((predictions_a[cell].score, ok_a))
        if cell in predictions_b:
            scored_b.append((predictions_b[cell].score, ok_b))
    return DisagreementReport(
        system_a=system_a or _label(predictions_a, "a"),
        system_b=system_b or _label(predictions_b, "b"),
        n_cells=len(cells),
        n_exactly_one=exactly_one,
        a_only=a_only,
        b_only=b_only,
        quartiles_a=confidence_quartiles(scored_a),
        quartiles_b=confidence_quartiles(scored_b),
    )
