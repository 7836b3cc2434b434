"""Common estimator surface for the masked-cell predictors.

All predictors follow the sklearn convention: hyperparameters are constructor
arguments stored under their own names, ``fit`` returns ``self`` and stores
learned state in trailing-underscore attributes, and ``get_params`` /
``set_params`` come from :class:`sklearn.base.BaseEstimator` so the models
compose with the wider ecosystem.  Unlike numeric sklearn estimators they
consume :class:`~typopredict.data.Dataset` objects rather than matrices.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import Dataset, LanguageRecord
from .predictions import PredictionMap, ScoredPrediction
from .validation import check_dataset


class TypologyPredictor(BaseEstimator):
    """Base class: ``fit(dataset)`` then ``predict(dataset)`` over masked cells."""

    def _predict_cell(self, record: LanguageRecord, feature: str) -> ScoredPrediction | None:
        raise NotImplementedError

    def predict(self, dataset: Dataset) -> PredictionMap:
        """One prediction per MASKED cell of ``dataset``.

        A predictor may decline a cell (return ``None``) when it has no basis
        at all for a value — e.g. a feature never seen during fitting.  Such
        cells are simply absent from the result, which evaluation counts as
        wrong.
        """
        check_is_fitted(self)
        check_dataset(dataset)
        predictions: PredictionMap = {}
        for record in dataset:
            for feature in record.masked_features():
                prediction = self._predict_cell(record, feature)
                if prediction is not None:
                    predictions[(record.wals_code, feature)] = prediction
        return predictions
