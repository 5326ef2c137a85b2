"""Deep dictionary learning with greedy MOD and joint majorization-minimization training."""

from .activation import Activation
from .data import LabeledSet, SyntheticSpec, gen_synthetic, load_dataset, load_model, read_csv_matrix, read_idx, save_model
from .estimator import DeepDictionaryLearning
from .exceptions import DataError, DDLError, NumericError, ShapeError
from .knn import EvalReport, evaluate, knn_predict
from .model import DdlModel, FeatureExtractor, extract_features, objective, synthesize
from .trainers import TrainConfig, TrainTrace, init_deterministic, mod_als, train_greedy, train_mm

__version__ = "0.1.0"

__all__ = [
    "Activation", "DdlModel", "DeepDictionaryLearning", "DataError", "DDLError", "EvalReport",
    "FeatureExtractor", "LabeledSet", "NumericError", "ShapeError", "SyntheticSpec", "TrainConfig",
    "TrainTrace", "evaluate", "extract_features", "gen_synthetic", "init_deterministic", "knn_predict",
    "load_dataset", "load_model", "mod_als", "objective", "read_csv_matrix", "read_idx", "save_model",
    "synthesize", "train_greedy", "train_mm",
]
