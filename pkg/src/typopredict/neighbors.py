"""Nearest-neighbour prediction over languages.

Two distances: Hamming over the raw feature grid (a position counts as
matching only when both languages know it and agree), and cosine distance
between trained language embeddings.  A missing value is predicted by a
majority vote of the nearest languages that know it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .base import TypologyPredictor
from .data import Dataset, LanguageRecord, most_frequent, value_counts
from .embedding import EmbeddingModel
from .errors import DataValidationError
from .predictions import PredictionMap, ScoredPrediction, System
from .validation import check_dataset, check_positive_int

DEFAULT_K_HAMMING = 22
DEFAULT_K_EMBEDDING = 33

METRICS = ("hamming", "embedding")


@dataclass(frozen=True)
class Neighbor:
    code: str
    distance: float


NeighborList = tuple[Neighbor, ...]


def hamming_distance(a: LanguageRecord, b: LanguageRecord, features: Iterable[str]) -> int:
    """Positions of ``features`` where the two languages do not agree.

    Agreement requires both cells to be known with equal values; a masked or
    absent cell on either side makes the position count as a mismatch.
    """
    distance = 0
    for feature in features:
        ca = a.cell(feature)
        cb = b.cell(feature)
        if not (ca.is_known and cb.is_known and ca.value == cb.value):
            distance += 1
    return distance


def cosine_distance(u, v) -> float:
    """``1 - cos(u, v)``, clamped into [0, 2]; zero vectors sit at 1."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 1.0
    return min(max(1.0 - float(u @ v) / (nu * nv), 0.0), 2.0)


def nearest_neighbors(
    query_code: str, distances: Iterable[tuple[str, float]], k: int
) -> NeighborList:
    """The ``k`` closest languages, never including the query itself.

    Equal distances are ordered by language code, so the neighbourhood is
    deterministic.
    """
    check_positive_int(k, "k")
    ranked = sorted(
        (distance, code) for code, distance in distances if code != query_code
    )
    return tuple(Neighbor(code=code, distance=distance) for distance, code in ranked[:k])


def knn_predict(
    neighbors: NeighborList,
    by_code: dict[str, LanguageRecord],
    feature: str,
    fallback_value: str,
    system: System,
) -> ScoredPrediction:
    """Majority vote among the neighbours that know the feature.

    The reported score is the winning vote share.  A tie goes to the value of
    the nearest voter holding one of the tied values; with no voters at all
    the supplied fallback value is used with score 0.
    """
    voters = [n for n in neighbors if by_code[n.code].cell(feature).is_known]
    if not voters:
        return ScoredPrediction(
            feature=feature, value=fallback_value, score=0.0, system=system, fallback_used=True
        )
    tally = Counter(by_code[n.code].cell(feature).value for n in voters)
    top = max(tally.values())
    tied = {value for value, count in tally.items() if count == top}
    if len(tied) == 1:
        winner = next(iter(tied))
    else:
        winner = next(
            by_code[n.code].cell(feature).value
            for n in voters
            if by_code[n.code].cell(feature).value in tied
        )
    return ScoredPrediction(
        feature=feature, value=winner, score=top / len(voters), system=system
    )


class NearestNeighborPredictor(TypologyPredictor):
    """kNN over either the raw feature grid or trained language embeddings.

    ``metric`` is ``"hamming"`` or ``"embedding"``; ``k`` defaults to 22 and
    33 respectively.  The embedding metric needs ``embedding_model`` (a
    trained :class:`~typopredict.embedding.EmbeddingModel`) whose vocabulary
    covers the languages being compared.
    """

    def __init__(
        self,
        metric: str = "hamming",
        k: int | None = None,
        embedding_model: EmbeddingModel | None = None,
    ):
        self.metric = metric
        self.k = k
        self.embedding_model = embedding_model

    @property
    def _system(self) -> System:
        return System.KNN_HAMMING if self.metric == "hamming" else System.KNN_EMBED

    def _k(self) -> int:
        if self.k is not None:
            return check_positive_int(self.k, "k")
        return DEFAULT_K_HAMMING if self.metric == "hamming" else DEFAULT_K_EMBEDDING

    def fit(self, dataset: Dataset) -> "NearestNeighborPredictor":
        if self.metric not in METRICS:
            raise DataValidationError(f"unknown metric {self.metric!r}")
        if self.metric == "embedding" and self.embedding_model is None:
            raise DataValidationError("the embedding metric needs an embedding_model")
        check_dataset(dataset, non_empty=True)
        self._k()
        self.records_ = tuple(dataset)
        self.by_code_ = dict(dataset.by_code)
        self.feature_space_ = tuple(sorted(dataset.feature_vocab))
        # known (feature -> value) maps, for fast pairwise comparison
        self.known_vectors_ = {
            rec.wals_code: dict(rec.known_features()) for rec in dataset
        }
        self.modes_ = {
            feature: most_frequent(counts)
            for feature, counts in value_counts(dataset).items()
            if counts
        }
        return self

    def _fast_hamming(self, query_vec: dict[str, str], other_vec: dict[str, str]) -> int:
        matches = 0
        small, large = (
            (query_vec, other_vec) if len(query_vec) <= len(other_vec) else (other_vec, query_vec)
        )
        for feature, value in small.items():
            if large.get(feature) == value:
                matches += 1
        return len(self.feature_space_) - matches

    def _distances(self, record: LanguageRecord) -> list[tuple[str, float]]:
        if self.metric == "hamming":
            space = set(self.feature_space_)
            query_vec = {
                feature: value
                for feature, value in record.known_features()
                if feature in space
            }
            return [
                (code, float(self._fast_hamming(query_vec, vec)))
                for code, vec in self.known_vectors_.items()
            ]
        vocab = self.embedding_model.vocab
        query_id = vocab.lang_ids.get(record.wals_code)
        if query_id is None:
            return []
        query_vec = self.embedding_model.lang_emb[query_id]
        out = []
        for code in self.known_vectors_:
            other_id = vocab.lang_ids.get(code)
            if other_id is not None:
                out.append(
                    (code, cosine_distance(query_vec, self.embedding_model.lang_emb[other_id]))
                )
        return out

    def neighbors_of(self, record: LanguageRecord) -> NeighborList:
        check_is_fitted(self)
        return nearest_neighbors(record.wals_code, self._distances(record), self._k())

    def predict(self, dataset: Dataset) -> PredictionMap:
        check_is_fitted(self)
        check_dataset(dataset)
        predictions: PredictionMap = {}
        for record in dataset:
            masked = list(record.masked_features())
            if not masked:
                continue
            neighbors = self.neighbors_of(record)
            for feature in masked:
                if feature not in self.modes_:
                    continue
                predictions[(record.wals_code, feature)] = knn_predict(
                    neighbors, self.by_code_, feature, self.modes_[feature], self._system
                )
        return predictions

    def _predict_cell(self, record: LanguageRecord, feature: str) -> ScoredPrediction | None:
        if feature not in self.modes_:
            return None
        return knn_predict(
            self.neighbors_of(record), self.by_code_, feature, self.modes_[feature], self._system
        )
