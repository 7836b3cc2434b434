"""Prediction records and the TSV exchange format for prediction maps."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import DataFormatError, DataValidationError


class System(Enum):
    PROBABILISTIC = "probabilistic"
    NEURAL = "neural"
    KNN_HAMMING = "knn-hamming"
    KNN_EMBED = "knn-embed"
    BASELINE = "baseline"
    COMBINED = "combined"


@dataclass(frozen=True)
class ScoredPrediction:
    """A predicted value for one cell, with the producing system's confidence.

    ``score`` is the system's own confidence: the best correlation score for
    the probabilistic system, the output probability for the neural system,
    the vote fraction for kNN.  ``source`` names the single best source
    observation ``(feature, value)`` when the probabilistic system produced
    the prediction from evidence; it must be absent otherwise.  ``provenance``
    records which subsystem a combined prediction was taken from.
    """

    feature: str
    value: str
    score: float
    system: System
    source: tuple[str, str] | None = None
    fallback_used: bool = False
    provenance: System | None = None

    def __post_init__(self):
        if self.score < 0.0:
            raise DataValidationError(f"negative confidence score {self.score}")
        if self.source is not None and (
            self.system is not System.PROBABILISTIC or self.fallback_used
        ):
            raise DataValidationError(
                "source evidence is only meaningful for non-fallback "
                "probabilistic predictions"
            )


#: Maps ``(wals_code, feature)`` to a prediction.
PredictionMap = dict[tuple[str, str], ScoredPrediction]

_PRED_HEADER = ("wals_code", "feature", "value", "confidence", "system")


def write_predictions(predictions: PredictionMap, path) -> None:
    """Write a prediction map as TSV, one row per cell, sorted for diffability."""
    path = Path(path)
    out = ["\t".join(_PRED_HEADER)]
    for (code, feature), pred in sorted(predictions.items()):
        for text in (code, feature, pred.value):
            if "\t" in text or "\n" in text:
                raise DataValidationError(f"{code}/{feature}: field contains tab or newline")
        out.append(
            "\t".join((code, feature, pred.value, repr(pred.score), pred.system.value))
        )
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def read_predictions(path) -> PredictionMap:
    """Read a prediction TSV back into a map.

    Only the five serialized columns survive a round trip; source evidence and
    fallback flags are not part of the exchange format.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    if not lines or tuple(lines[0].split("\t")) != _PRED_HEADER:
        raise DataFormatError(f"{path}:1: expected header {' '.join(_PRED_HEADER)!r}")
    predictions: PredictionMap = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != len(_PRED_HEADER):
            raise DataFormatError(
                f"{path}:{lineno}: expected {len(_PRED_HEADER)} columns, got {len(cols)}"
            )
        code, feature, value, score_s, system_s = cols
        try:
            score = float(score_s)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: bad confidence {score_s!r}") from None
        try:
            system = System(system_s)
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: unknown system {system_s!r}") from None
        if (code, feature) in predictions:
            raise DataFormatError(f"{path}:{lineno}: duplicate cell {code}/{feature}")
        predictions[(code, feature)] = ScoredPrediction(feature, value, score, system)
    return predictions
