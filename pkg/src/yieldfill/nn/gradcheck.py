"""Finite-difference verification of backpropagated gradients.

Central differences of the MSE loss with respect to every parameter are
compared against the analytic backward pass. Both sides evaluate the
train-mode loss (batch statistics in batch norm), so the comparison is of
the exact same function. Running-statistic buffers are restored afterward
since repeated forward passes would otherwise drift them.
"""
from __future__ import annotations

import numpy as np

from .network import Network, mse_loss

__all__ = ["gradient_check"]

MAX_CHECK_PARAMS = 5000


def gradient_check(
    net: Network,
    x: np.ndarray,
    target: np.ndarray,
    epsilon: float = 1e-4,
) -> float:
    """Max elementwise relative error between analytic and numeric gradients."""
    if net.n_params > MAX_CHECK_PARAMS:
        raise ValueError(
            f"gradient check is O(params) full passes; {net.n_params} exceeds "
            f"the {MAX_CHECK_PARAMS} limit"
        )
    saved_buffers = [
        [b.copy() for b in layer.buffers] for layer in net.layers
    ]
    try:
        output = net.forward(x, train=True)
        _, loss_grad = mse_loss(output, target)
        analytic = net.backward(loss_grad)

        theta = net.param_vector()
        numeric = np.empty_like(theta)
        probe = theta.copy()
        for i in range(theta.size):
            probe[i] = theta[i] + epsilon
            net.set_param_vector(probe)
            loss_plus, _ = mse_loss(net.forward(x, train=True), target)
            probe[i] = theta[i] - epsilon
            net.set_param_vector(probe)
            loss_minus, _ = mse_loss(net.forward(x, train=True), target)
            probe[i] = theta[i]
            numeric[i] = (loss_plus - loss_minus) / (2.0 * epsilon)
        net.set_param_vector(theta)
    finally:
        for layer, buffers in zip(net.layers, saved_buffers):
            for buf, saved in zip(layer.buffers, buffers):
                buf[...] = saved

    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-7)
    return float((np.abs(analytic - numeric) / scale).max())
