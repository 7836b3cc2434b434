"""Confidence-threshold combination of the neural and co-occurrence systems.

The neural prediction is the default.  The co-occurrence prediction takes
over only for cells where the neural system is unsure (score strictly below
its threshold) while the co-occurrence system is confident (score strictly
above its own threshold) and is not merely falling back to the majority
value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .base import TypologyPredictor
from .correlation import CorrelationPredictor
from .data import Dataset
from .embedding import NeuralPredictor
from .errors import DataValidationError
from .predictions import PredictionMap, ScoredPrediction, System
from .validation import check_dataset

#: Below this the neural system counts as unsure.
DEFAULT_NEURAL_THRESHOLD = 0.65
#: Above this the co-occurrence system counts as confident.
DEFAULT_PROB_THRESHOLD = 0.5


@dataclass(frozen=True)
class CombinerConfig:
    neural_threshold: float = DEFAULT_NEURAL_THRESHOLD
    prob_threshold: float = DEFAULT_PROB_THRESHOLD

    def __post_init__(self):
        for name in ("neural_threshold", "prob_threshold"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise DataValidationError(f"{name} must be non-negative, got {value}")


def _as_combined(prediction: ScoredPrediction) -> ScoredPrediction:
    return replace(
        prediction,
        system=System.COMBINED,
        provenance=prediction.system,
        source=None,
    )


def combine(
    probabilistic: ScoredPrediction | None,
    neural: ScoredPrediction | None,
    config: CombinerConfig | None = None,
) -> ScoredPrediction | None:
    """Pick one of the two predictions for a cell; see the module docstring.

    Either side may be missing, in which case the other is used as-is.  The
    result carries ``system=COMBINED`` with the chosen subsystem recorded in
    ``provenance``.
    """
    config = config or CombinerConfig()
    if probabilistic is None and neural is None:
        return None
    if neural is None:
        return _as_combined(probabilistic)
    if probabilistic is None:
        return _as_combined(neural)
    use_probabilistic = (
        neural.score < config.neural_threshold
        and probabilistic.score > config.prob_threshold
        and not probabilistic.fallback_used
    )
    return _as_combined(probabilistic if use_probabilistic else neural)


def combine_maps(
    probabilistic: PredictionMap,
    neural: PredictionMap,
    config: CombinerConfig | None = None,
    baseline: PredictionMap | None = None,
) -> PredictionMap:
    """Combine two per-cell prediction maps over the union of their cells.

    ``baseline`` may supply additional cells neither system predicted.
    """
    config = config or CombinerConfig()
    cells = dict.fromkeys(probabilistic)
    cells.update(dict.fromkeys(neural))
    if baseline is not None:
        cells.update(dict.fromkeys(baseline))
    combined: PredictionMap = {}
    for cell in cells:
        choice = combine(probabilistic.get(cell), neural.get(cell), config)
        if choice is None and baseline is not None and cell in baseline:
            choice = _as_combined(baseline[cell])
        if choice is not None:
            combined[cell] = choice
    return combined


class ThresholdCombiner(TypologyPredictor):
    """Estimator gluing a co-occurrence and a neural predictor together."""

    def __init__(
        self,
        probabilistic: CorrelationPredictor | None = None,
        neural: NeuralPredictor | None = None,
        neural_threshold: float = DEFAULT_NEURAL_THRESHOLD,
        prob_threshold: float = DEFAULT_PROB_THRESHOLD,
    ):
        self.probabilistic = probabilistic
        self.neural = neural
        self.neural_threshold = neural_threshold
        self.prob_threshold = prob_threshold

    def _config(self) -> CombinerConfig:
        return CombinerConfig(
            neural_threshold=self.neural_threshold, prob_threshold=self.prob_threshold
        )

    def fit(self, dataset: Dataset) -> "ThresholdCombiner":
        self._config()
        check_dataset(dataset, non_empty=True)
        self.probabilistic_ = (self.probabilistic or CorrelationPredictor()).fit(dataset)
        self.neural_ = (self.neural or NeuralPredictor()).fit(dataset)
        return self

    @classmethod
    def from_fitted(
        cls,
        probabilistic: CorrelationPredictor,
        neural: NeuralPredictor,
        config: CombinerConfig | None = None,
    ) -> "ThresholdCombiner":
        """Wrap two already-fitted predictors without retraining them."""
        config = config or CombinerConfig()
        combiner = cls(
            neural_threshold=config.neural_threshold, prob_threshold=config.prob_threshold
        )
        combiner.probabilistic_ = probabilistic
        combiner.neural_ = neural
        return combiner

    def predict(self, dataset: Dataset) -> PredictionMap:
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self)
        check_dataset(dataset)
        return combine_maps(
            self.probabilistic_.predict(dataset),
            self.neural_.predict(dataset),
            self._config(),
        )
