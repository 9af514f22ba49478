from src.newsclf.training.adam import AdamState, adam_step
from src.newsclf.training.trace import EpochRecord, LossTrace, StepRecord, read_step_trace
from src.newsclf.training.trainer import (
    Evaluation,
    TrainConfig,
    TrainResult,
    evaluate,
    train,
    train_with_restarts,
)

__all__ = [
    "AdamState",
    "EpochRecord",
    "Evaluation",
    "LossTrace",
    "StepRecord",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "evaluate",
    "read_step_trace",
    "train",
    "train_with_restarts",
]
