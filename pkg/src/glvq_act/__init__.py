"""Generalized learning vector quantization with pluggable classifier-function activations."""

from .activation import ActivationKind, ActivationSpec, derivative, evaluate, parse_activation, quasi_max
from .bench import accuracy, run_benchmark
from .core import GlvqModel, Projection, PrototypeSet, model_from_json, model_to_json, predict
from .data import Dataset, load_csv, load_manifest, split
from .trainer import TrainConfig, init_prototypes, train

__all__ = [
    "ActivationKind",
    "ActivationSpec",
    "Dataset",
    "GlvqModel",
    "Projection",
    "PrototypeSet",
    "TrainConfig",
    "accuracy",
    "derivative",
    "evaluate",
    "init_prototypes",
    "load_csv",
    "load_manifest",
    "model_from_json",
    "model_to_json",
    "parse_activation",
    "predict",
    "quasi_max",
    "run_benchmark",
    "split",
    "train",
]

__version__ = "0.1.0"
