"""Separable-convolution CNN for four-stage dementia classification of brain MRI slices."""

from .config import ModelConfig, default_config, synthetic_config
from .network import Network, count_parameters
from .training import TrainState, build_model, evaluate, predict, train

__all__ = [
    "ModelConfig",
    "Network",
    "TrainState",
    "build_model",
    "count_parameters",
    "default_config",
    "evaluate",
    "predict",
    "synthetic_config",
    "train",
]
__version__ = "0.1.0"
