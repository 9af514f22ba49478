from src.newsclf.models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.newsclf.models.config import ARCHITECTURES, ModelConfig
from src.newsclf.models.network import (
    MODEL_REGISTRY,
    Model,
    Prediction,
    backward,
    build_model,
    forward,
    predict,
)

__all__ = [
    "ARCHITECTURES",
    "Checkpoint",
    "MODEL_REGISTRY",
    "Model",
    "ModelConfig",
    "Prediction",
    "backward",
    "build_model",
    "forward",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
]
