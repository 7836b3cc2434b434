"""Pairwise co-occurrence model over typological features.

Counts how often feature values co-occur across languages, turns the counts
into conditional probabilities, weighs them by support (log count) and by the
mutual information of the feature pair, and predicts each missing value from
the single best-scoring piece of evidence.
"""

from __future__ import annotations

import json
import math
from collections import Counter

from .base import TypologyPredictor
from .data import Dataset, LanguageRecord, most_frequent, value_counts
from .errors import DataFormatError, DataValidationError, UnknownFeatureError
from .geo import PROBABILISTIC_PROFILE, GeoZoning, derive_features
from .predictions import PredictionMap, ScoredPrediction, System
from .validation import check_dataset

SCORING_MODES = ("cond", "score1", "score2")


class CooccurrenceTable:
    """Joint value counts for every pair of distinct features.

    A language contributes one count per pair of observations with distinct
    feature names, so multi-valued sources (several country codes) contribute
    several counts.  Counts are stored once per unordered pair and exposed in
    either orientation.
    """

    def __init__(self):
        # (s, t) -> {x -> Counter of y}; both orientations of each pair.
        self._index: dict[tuple[str, str], dict[str, Counter]] = {}
        self._totals: dict[tuple[str, str], int] = {}

    @staticmethod
    def _canonical(s: str, t: str) -> tuple[str, str]:
        return (s, t) if s <= t else (t, s)

    def add(self, s: str, x: str, t: str, y: str, n: int = 1) -> None:
        if s == t:
            raise DataValidationError(f"cannot pair feature {s!r} with itself")
        self._index.setdefault((s, t), {}).setdefault(x, Counter())[y] += n
        self._index.setdefault((t, s), {}).setdefault(y, Counter())[x] += n
        key = self._canonical(s, t)
        self._totals[key] = self._totals.get(key, 0) + n

    def joint(self, s: str, x: str, t: str, y: str) -> int:
        """Number of co-observations with ``s = x`` and ``t = y``."""
        return self._index.get((s, t), {}).get(x, {}).get(y, 0)

    def conditional_counts(self, s: str, x: str, t: str) -> Counter:
        """Counts of each ``t`` value among co-observations with ``s = x``."""
        return self._index.get((s, t), {}).get(x, Counter())

    def marginal(self, s: str, x: str, t: str) -> int:
        """Number of co-observations with ``s = x`` and ``t`` known."""
        return sum(self.conditional_counts(s, x, t).values())

    def pair_total(self, s: str, t: str) -> int:
        """Total co-observations of the pair; equals the sum of its joints."""
        return self._totals.get(self._canonical(s, t), 0)

    def pairs(self):
        """The unordered feature pairs with at least one co-observation."""
        return iter(self._totals)

    def features(self) -> tuple[str, ...]:
        return tuple(sorted({name for pair in self._totals for name in pair}))

    def to_json_dict(self) -> dict:
        pairs = []
        for s, t in sorted(self._totals):
            cells = [
                [x, y, c]
                for x, ys in sorted(self._index[(s, t)].items())
                for y, c in sorted(ys.items())
            ]
            pairs.append({"source": s, "target": t, "counts": cells})
        return {"pairs": pairs}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "CooccurrenceTable":
        table = cls()
        try:
            for pair in payload["pairs"]:
                s, t = pair["source"], pair["target"]
                for x, y, c in pair["counts"]:
                    table.add(s, x, t, y, int(c))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed co-occurrence table: {exc}") from exc
        return table


def fit_counts(dataset: Dataset, zoning: GeoZoning | None = None) -> CooccurrenceTable:
    """Count value co-occurrences over every language's known observations."""
    check_dataset(dataset, non_empty=True)
    zoning = zoning or GeoZoning()
    table = CooccurrenceTable()
    for record in dataset:
        observations = derive_features(record, zoning, profile=PROBABILISTIC_PROFILE)
        for i, (s, x) in enumerate(observations):
            for t, y in observations[i + 1 :]:
                if s != t:
                    table.add(s, x, t, y)
    return table


def cond_prob(table: CooccurrenceTable, s: str, x: str, t: str, y: str) -> float:
    """P(t = y | s = x) over languages where both features are known."""
    m = table.marginal(s, x, t)
    if m == 0:
        return 0.0
    return table.joint(s, x, t, y) / m


def mutual_information(table: CooccurrenceTable, s: str, t: str) -> float:
    """Mutual information (nats) of the empirical joint of a feature pair.

    Restricted to co-observations where both features are known; value pairs
    never seen together contribute nothing.
    """
    a, b = CooccurrenceTable._canonical(s, t)
    total = table.pair_total(a, b)
    if total == 0:
        return 0.0
    rows = table._index[(a, b)]
    col_marginals: Counter = Counter()
    for ys in rows.values():
        col_marginals.update(ys)
    info = 0.0
    # accumulate in sorted key order so the result is independent of the
    # order the counts were added (or deserialized) in
    for x in sorted(rows):
        ys = rows[x]
        row_total = sum(ys.values())
        for y in sorted(ys):
            c = ys[y]
            p_xy = c / total
            p_x = row_total / total
            p_y = col_marginals[y] / total
            info += p_xy * math.log(p_xy / (p_x * p_y))
    return max(0.0, info)


class MITable:
    """Lazily cached mutual information for feature pairs of one table."""

    def __init__(self, table: CooccurrenceTable):
        self._table = table
        self._cache: dict[tuple[str, str], float] = {}

    def get(self, s: str, t: str) -> float:
        key = CooccurrenceTable._canonical(s, t)
        if key not in self._cache:
            self._cache[key] = mutual_information(self._table, s, t)
        return self._cache[key]


def score1(table: CooccurrenceTable, s: str, x: str, t: str, y: str) -> float:
    """Conditional probability weighted by the log of its supporting count.

    Zero whenever the joint count is at most one, so a single co-occurrence
    is never treated as evidence.
    """
    c = table.joint(s, x, t, y)
    if c <= 1:
        return 0.0
    return cond_prob(table, s, x, t, y) * math.log(c)


def score2(
    table: CooccurrenceTable, s: str, x: str, t: str, y: str, mi: MITable | None = None
) -> float:
    """``score1`` additionally weighted by the mutual information of the pair."""
    base = score1(table, s, x, t, y)
    if base == 0.0:
        return 0.0
    info = mi.get(s, t) if mi is not None else mutual_information(table, s, t)
    return base * info


def _log_scale(mode: str, log_base: float) -> float:
    """Factor turning a natural-log score into the requested log base.

    Purely a reporting rescale: it is a positive constant per mode, so the
    ranking of candidates never depends on the base.
    """
    if log_base <= 0 or log_base == 1.0:
        raise DataValidationError(f"log base must be positive and != 1, got {log_base}")
    if mode == "cond":
        return 1.0
    ln_b = math.log(log_base)
    return 1.0 / ln_b if mode == "score1" else 1.0 / (ln_b * ln_b)


def predict_feature(
    table: CooccurrenceTable,
    mi: MITable,
    observations: list[tuple[str, str]],
    target: str,
    *,
    fallback_value: str,
    mode: str = "score2",
    log_base: float = math.e,
) -> ScoredPrediction:
    """Predict one feature from the single best-scoring observation.

    Every observation ``s = x`` proposes each target value it has co-occurred
    with, scored by the chosen mode.  Ties prefer the larger joint count, then
    the lexicographically smaller value.  When no candidate scores above zero
    the globally most frequent value is returned instead and the prediction is
    flagged as a fallback.
    """
    if mode not in SCORING_MODES:
        raise DataValidationError(f"unknown scoring mode {mode!r}")
    scale = _log_scale(mode, log_base)

    best = None  # (-score, -joint, value, source_feature, source_value)
    for s, x in observations:
        if s == target:
            continue
        candidates = table.conditional_counts(s, x, target)
        if not candidates:
            continue
        m = sum(candidates.values())
        for y, c in candidates.items():
            if mode == "cond":
                score = c / m
            else:
                score = 0.0 if c <= 1 else (c / m) * math.log(c)
                if mode == "score2" and score != 0.0:
                    score *= mi.get(s, target)
            key = (-score, -c, y, s, x)
            if best is None or key < best:
                best = key
    if best is None or -best[0] <= 0.0:
        return ScoredPrediction(
            feature=target,
            value=fallback_value,
            score=0.0,
            system=System.PROBABILISTIC,
            fallback_used=True,
        )
    neg_score, _, y, s, x = best
    return ScoredPrediction(
        feature=target,
        value=y,
        score=-neg_score * scale,
        system=System.PROBABILISTIC,
        source=(s, x),
    )


def predict_all(
    table: CooccurrenceTable,
    mi: MITable,
    dataset: Dataset,
    modes: dict[str, str],
    zoning: GeoZoning | None = None,
    *,
    mode: str = "score2",
    log_base: float = math.e,
) -> PredictionMap:
    """Predict every masked cell of a dataset; see :func:`predict_feature`."""
    zoning = zoning or GeoZoning()
    out: PredictionMap = {}
    for record in dataset:
        observations = None
        for feature in record.masked_features():
            if feature not in modes:
                continue
            if observations is None:
                observations = derive_features(record, zoning, profile=PROBABILISTIC_PROFILE)
            out[(record.wals_code, feature)] = predict_feature(
                table,
                mi,
                observations,
                feature,
                fallback_value=modes[feature],
                mode=mode,
                log_base=log_base,
            )
    return out


class CorrelationPredictor(TypologyPredictor):
    """Estimator wrapper around the pairwise co-occurrence model.

    ``scoring`` selects the ranking score: the raw conditional probability
    (``"cond"``), the count-weighted ``"score1"``, or the default
    mutual-information-weighted ``"score2"``.  ``log_base`` only rescales the
    reported confidences; predictions are identical for any base.
    """

    def __init__(
        self,
        scoring: str = "score2",
        zoning: GeoZoning | None = None,
        log_base: float = math.e,
    ):
        self.scoring = scoring
        self.zoning = zoning
        self.log_base = log_base

    def fit(self, dataset: Dataset) -> "CorrelationPredictor":
        if self.scoring not in SCORING_MODES:
            raise DataValidationError(f"unknown scoring mode {self.scoring!r}")
        _log_scale(self.scoring, self.log_base)  # validate the base early
        check_dataset(dataset, non_empty=True)
        self.zoning_ = self.zoning or GeoZoning()
        self.table_ = fit_counts(dataset, self.zoning_)
        self.mi_ = MITable(self.table_)
        self.modes_ = {
            feature: most_frequent(counts)
            for feature, counts in value_counts(dataset).items()
            if counts
        }
        return self

    def _predict_cell(self, record: LanguageRecord, feature: str) -> ScoredPrediction | None:
        if feature not in self.modes_:
            return None  # no known value anywhere in training: nothing to predict from
        observations = derive_features(record, self.zoning_, profile=PROBABILISTIC_PROFILE)
        return predict_feature(
            self.table_,
            self.mi_,
            observations,
            feature,
            fallback_value=self.modes_[feature],
            mode=self.scoring,
            log_base=self.log_base,
        )

    def predict_value(self, record: LanguageRecord, feature: str) -> ScoredPrediction:
        """Predict a single feature for a single language."""
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self)
        prediction = self._predict_cell(record, feature)
        if prediction is None:
            raise UnknownFeatureError(feature)
        return prediction

    def save(self, path) -> None:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self)
        payload = {
            "format": "typopredict-correlation",
            "scoring": self.scoring,
            "log_base": self.log_base,
            "lat_cuts": list(self.zoning_.lat_cuts),
            "lon_cuts": list(self.zoning_.lon_cuts),
            "modes": self.modes_,
            "table": self.table_.to_json_dict(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CorrelationPredictor":
        with open(path, encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
        if payload.get("format") != "typopredict-correlation":
            raise DataFormatError(f"{path}: not a saved correlation model")
        try:
            zoning = GeoZoning(tuple(payload["lat_cuts"]), tuple(payload["lon_cuts"]))
            model = cls(
                scoring=payload["scoring"], zoning=zoning, log_base=float(payload["log_base"])
            )
            model.zoning_ = zoning
            model.table_ = CooccurrenceTable.from_json_dict(payload["table"])
            model.mi_ = MITable(model.table_)
            model.modes_ = dict(payload["modes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: malformed correlation model: {exc}") from exc
        return model
