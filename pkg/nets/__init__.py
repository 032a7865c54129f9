# nets: the desk-scale classifier f_θ and its training loop
from nets.mlp import (
    DETERMINISTIC,
    Deterministic,
    MlpModel,
    Stochastic,
    backward,
    cross_entropy_loss,
    forward,
    init_model,
    softmax,
)
from nets.serialize import load_model, save_model
from nets.train import TrainConfig, TrainHistory, train

__all__ = [
    "DETERMINISTIC",
    "Deterministic",
    "MlpModel",
    "Stochastic",
    "TrainConfig",
    "TrainHistory",
    "backward",
    "cross_entropy_loss",
    "forward",
    "init_model",
    "load_model",
    "save_model",
    "softmax",
    "train",
]
