"""Fine-tuning harness: pluggable speech encoders plus a classification head."""

from .encoders import SpeechEncoder, TinyEncoder, TransformerBackbone, load_encoder
from .head import ClassifierHead
from .labels import Label, LabelSpace
from .training import (
    Classifier,
    CostReport,
    TrainHyperparams,
    TrainingExample,
    TrainingLog,
    TrainingSet,
    fine_tune,
    load_classifier,
    measure_cost,
    predict,
    predict_batch,
    save_classifier,
)

__all__ = [
    "SpeechEncoder",
    "TinyEncoder",
    "TransformerBackbone",
    "load_encoder",
    "ClassifierHead",
    "Label",
    "LabelSpace",
    "Classifier",
    "CostReport",
    "TrainHyperparams",
    "TrainingExample",
    "TrainingLog",
    "TrainingSet",
    "fine_tune",
    "load_classifier",
    "measure_cost",
    "predict",
    "predict_batch",
    "save_classifier",
]
