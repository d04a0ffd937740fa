from .model import (
    Checkpoint,
    NetworkSpec,
    backward,
    build_network,
    extract_embedding,
    extract_embeddings,
    forward,
    images_to_batch,
    predict,
    weight_shapes,
)
from .optim import adam_step, init_adam_state
from .training import TrainConfig, evaluate, train_multiclass, train_runs, write_training_log

__all__ = [
    "Checkpoint",
    "NetworkSpec",
    "TrainConfig",
    "adam_step",
    "backward",
    "build_network",
    "evaluate",
    "extract_embedding",
    "extract_embeddings",
    "forward",
    "images_to_batch",
    "init_adam_state",
    "predict",
    "train_multiclass",
    "train_runs",
    "weight_shapes",
    "write_training_log",
]
