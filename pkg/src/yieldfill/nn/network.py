"""Layer sequencing, the flattened parameter vector, and the MSE loss."""
from __future__ import annotations

import numpy as np

from ..exceptions import ShapeError, StateError
from .layers import Layer

__all__ = ["Network", "mse_loss"]


class Network:
    """An ordered layer stack with a deterministic flat parameter order.

    Shapes are checked at construction by threading the per-example input
    shape through every layer, so incompatible stacks fail before any data
    flows. The parameter vector concatenates each layer's parameter arrays
    in layer order (weights before biases, scale before shift), which
    fixes the flattening order across runs and serialization.
    """

    def __init__(self, layers: list[Layer], input_shape: tuple):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
        self.output_shape = shape
        self._ready = False

    @property
    def n_params(self) -> int:
        return sum(p.size for layer in self.layers for p in layer.params)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[1:] != self.input_shape:
            raise ShapeError(
                f"network expects input shape (batch, {self.input_shape}), got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, train)
        self._ready = train
        return x

    def backward(self, loss_grad: np.ndarray) -> np.ndarray:
        """Backpropagate and return the flat gradient over all parameters."""
        if not self._ready:
            raise StateError("backward requires a preceding forward pass in train mode")
        grad = np.asarray(loss_grad, dtype=float)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        self._ready = False
        return self.grad_vector()

    def param_vector(self) -> np.ndarray:
        if self.n_params == 0:
            return np.zeros(0)
        return np.concatenate(
            [p.ravel() for layer in self.layers for p in layer.params]
        )

    def set_param_vector(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ShapeError(f"parameter vector must have length {self.n_params}")
        offset = 0
        for layer in self.layers:
            for p in layer.params:
                p[...] = vec[offset:offset + p.size].reshape(p.shape)
                offset += p.size

    def grad_vector(self) -> np.ndarray:
        if self.n_params == 0:
            return np.zeros(0)
        return np.concatenate(
            [g.ravel() for layer in self.layers for g in layer.grads]
        )


def mse_loss(output: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements, plus its gradient w.r.t. output.

    The gradient 2*(output - target)/count seeds backpropagation.
    """
    output = np.asarray(output, dtype=float)
    target = np.asarray(target, dtype=float)
    if output.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {output.shape} vs {target.shape}")
    diff = output - target
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size
