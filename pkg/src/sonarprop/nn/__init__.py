"""Minimal CNN stack: layers, network assembly, Adam, training, checkpoints."""

from .adam import Adam, adam_step
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Flatten,
    MaxPool2,
    ReLU,
    Sigmoid,
    conv2d,
    dense,
    maxpool2,
    mse_loss,
    relu,
    sigmoid,
)
from .network import ObjectnessNet, init_params
from .train import EpochStats, TrainConfig, train

__all__ = [
    "Adam",
    "adam_step",
    "BatchNorm",
    "Conv2D",
    "Dense",
    "Flatten",
    "MaxPool2",
    "ObjectnessNet",
    "ReLU",
    "Sigmoid",
    "TrainConfig",
    "conv2d",
    "dense",
    "EpochStats",
    "init_params",
    "load_checkpoint",
    "maxpool2",
    "mse_loss",
    "relu",
    "save_checkpoint",
    "sigmoid",
    "train",
]
