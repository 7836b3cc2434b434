"""Predicting missing typological feature values of the world's languages.

The package offers four prediction systems over WALS-style language data —
a pairwise co-occurrence model, an embedding discriminator, two kNN variants
— plus a confidence-threshold combination of the first two, and the masking
and evaluation machinery to measure them all.
"""

from .correlation import (
    CooccurrenceTable,
    CorrelationPredictor,
    MITable,
    cond_prob,
    fit_counts,
    mutual_information,
    score1,
    score2,
)
from .data import (
    CellState,
    Dataset,
    FeatureCell,
    LanguageRecord,
    Role,
    mask_split,
    merge_visible,
    parse_dataset,
    serialize_dataset,
)
from .embedding import (
    EmbeddingModel,
    HyperParams,
    NeuralPredictor,
    Vocabulary,
    default_grid,
    grid_search,
)
from .ensemble import CombinerConfig, ThresholdCombiner, combine, combine_maps
from .errors import (
    ConfigError,
    DataFormatError,
    DataValidationError,
    PredictionError,
    TrainingDivergedError,
    TypopredictError,
    UnknownFeatureError,
)
from .evaluation import (
    DisagreementReport,
    EvalReport,
    MostFrequentBaseline,
    accuracy,
    baseline_predict,
    disagreement_report,
    evaluate_predictions,
)
from .geo import CoordClustering, CoordinateKMeans, GeoZoning, cluster_coordinates, derive_features
from .neighbors import NearestNeighborPredictor, hamming_distance, nearest_neighbors
from .predictions import ScoredPrediction, System, read_predictions, write_predictions

__version__ = "0.1.0"

__all__ = [
    "CellState",
    "CombinerConfig",
    "ConfigError",
    "CooccurrenceTable",
    "CoordClustering",
    "CoordinateKMeans",
    "CorrelationPredictor",
    "DataFormatError",
    "DataValidationError",
    "Dataset",
    "DisagreementReport",
    "EmbeddingModel",
    "EvalReport",
    "FeatureCell",
    "GeoZoning",
    "HyperParams",
    "LanguageRecord",
    "MITable",
    "MostFrequentBaseline",
    "NearestNeighborPredictor",
    "NeuralPredictor",
    "PredictionError",
    "Role",
    "ScoredPrediction",
    "System",
    "ThresholdCombiner",
    "TrainingDivergedError",
    "TypopredictError",
    "UnknownFeatureError",
    "Vocabulary",
    "accuracy",
    "baseline_predict",
    "cluster_coordinates",
    "combine",
    "combine_maps",
    "cond_prob",
    "default_grid",
    "derive_features",
    "disagreement_report",
    "evaluate_predictions",
    "fit_counts",
    "grid_search",
    "hamming_distance",
    "mask_split",
    "merge_visible",
    "mutual_information",
    "nearest_neighbors",
    "parse_dataset",
    "read_predictions",
    "score1",
    "score2",
    "serialize_dataset",
    "write_predictions",
]
