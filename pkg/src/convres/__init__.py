"""convres: multi-label text classification with convolutional residual models."""

from .encoder import EncoderConfig
from .model import Model, ModelSpec
from .training import TrainConfig, evaluate, train

__all__ = ["EncoderConfig", "Model", "ModelSpec", "TrainConfig", "train", "evaluate"]
__version__ = "0.1.0"
