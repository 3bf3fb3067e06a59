"""Minimal dense/convolutional layer engine with hand-derived gradients.

Everything runs in 64-bit floats on numpy arrays: at desk scale,
reproducibility and verifiable gradients are worth more than speed. There
is no autodiff graph; each layer implements its own backward pass, and
every one of them is validated against central finite differences (see
:mod:`yieldfill.nn.gradcheck`).
"""
from .layers import (
    BatchNorm,
    Conv3x3,
    Crop,
    Dense,
    Flatten,
    MaxPool2x2,
    Pad,
    ReLU,
    Reshape,
    Sigmoid,
    Upsample2x2,
)
from .network import Network, mse_loss
from .optim import AdamState, adam_step
from .gradcheck import gradient_check
from .serialize import load_network, save_network

__all__ = [
    "BatchNorm",
    "Conv3x3",
    "Crop",
    "Dense",
    "Flatten",
    "MaxPool2x2",
    "Pad",
    "ReLU",
    "Reshape",
    "Sigmoid",
    "Upsample2x2",
    "Network",
    "mse_loss",
    "AdamState",
    "adam_step",
    "gradient_check",
    "load_network",
    "save_network",
]
