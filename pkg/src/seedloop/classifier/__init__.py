"""Probabilistic image classifier with swappable backends."""

from .models import (
    ClassifierModel,
    ModelSpec,
    TrainConfig,
    UnknownBackendError,
    init_model,
    load_model,
    register_backend,
    registered_backends,
    save_model,
)
from .training import EarlyStopper, predict_proba, records_to_array, train
from .metrics import EvalReport, confusion_report, evaluate, fuse_pair

__all__ = [
    "ClassifierModel",
    "ModelSpec",
    "TrainConfig",
    "UnknownBackendError",
    "init_model",
    "load_model",
    "register_backend",
    "registered_backends",
    "save_model",
    "EarlyStopper",
    "predict_proba",
    "records_to_array",
    "train",
    "EvalReport",
    "confusion_report",
    "evaluate",
    "fuse_pair",
]
