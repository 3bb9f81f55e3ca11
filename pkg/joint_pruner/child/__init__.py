from .dataset import Dataset, Split, load_dataset, save_dataset, synthetic_shapes
from .evaluator import ChildEvaluator, ExternalEvaluator, serve_evaluator
from .model import CHILD_SCHEMA, ChildModel, load_child, save_child
from .synthetic import SyntheticEvaluator, SyntheticLandscape, enumerate_actions, random_landscape, synthetic_eval
from .training import ChildConfig, accuracy, fine_tune, pretrain, retrain, test_loss

__all__ = [
    "CHILD_SCHEMA",
    "ChildConfig",
    "ChildEvaluator",
    "ChildModel",
    "Dataset",
    "ExternalEvaluator",
    "Split",
    "SyntheticEvaluator",
    "SyntheticLandscape",
    "accuracy",
    "enumerate_actions",
    "fine_tune",
    "load_child",
    "load_dataset",
    "pretrain",
    "random_landscape",
    "retrain",
    "save_child",
    "save_dataset",
    "serve_evaluator",
    "synthetic_eval",
    "synthetic_shapes",
    "test_loss",
]
