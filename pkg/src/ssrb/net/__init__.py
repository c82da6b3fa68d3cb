from .io import load_model, save_model
from .layers import softmax, softmax_cross_entropy
from .model import NetConfig, NetModel
from .train import AdamState, TrainConfig, adam_step, batch_loss_and_grads, one_hot, train

__all__ = [
    "AdamState",
    "NetConfig",
    "NetModel",
    "TrainConfig",
    "adam_step",
    "batch_loss_and_grads",
    "load_model",
    "one_hot",
    "save_model",
    "softmax",
    "softmax_cross_entropy",
    "train",
]
