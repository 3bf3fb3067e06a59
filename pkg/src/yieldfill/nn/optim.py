"""Adam optimizer with bias correction and inverse-time learning-rate decay."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ShapeError

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    """Optimizer state over one flat parameter vector.

    The effective learning rate at update t (0-based count of completed
    steps) is learning_rate / (1 + decay * t).
    """

    learning_rate: float
    decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: np.ndarray | None = field(default=None, repr=False)
    second_moment: np.ndarray | None = field(default=None, repr=False)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One Adam update; mutates ``state`` and returns the new parameters."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape:
        raise ShapeError(f"parameter/gradient length mismatch: {params.shape} vs {grads.shape}")
    if state.first_moment is None:
        state.first_moment = np.zeros_like(params)
        state.second_moment = np.zeros_like(params)
    if state.first_moment.shape != params.shape:
        raise ShapeError("optimizer state does not match the parameter vector")

    lr = state.learning_rate / (1.0 + state.decay * state.step)
    state.step += 1
    t = state.step
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * grads
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * grads * grads
    m_hat = state.first_moment / (1.0 - state.beta1 ** t)
    v_hat = state.second_moment / (1.0 - state.beta2 ** t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
