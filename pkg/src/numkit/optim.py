"""
Adam update rule
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from src.config.constants import (
    DEFAULT_ADAM_BETA1,
    DEFAULT_ADAM_BETA2,
    DEFAULT_ADAM_EPSILON,
    DEFAULT_LEARNING_RATE,
)
from src.numkit.params import ParamStore
from src.utils.errors import ContractError


@dataclass
class AdamState:
    """Step count, moment buffers and hyperparameters"""
    lr: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_ADAM_BETA1
    beta2: float = DEFAULT_ADAM_BETA2
    epsilon: float = DEFAULT_ADAM_EPSILON
    weight_decay: float = 0.0
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "weight_decay": self.weight_decay,
            "t": self.t,
        }


def adam_step(params: ParamStore, state: AdamState) -> None:
    """
    One bias-corrected Adam update over every trainable parameter

    Weight decay is added to the gradient as an L2 term before the moment
    updates. Gradients are zeroed afterwards.

    Raises:
        ContractError: a trainable parameter has no populated gradient
    """
    names = params.trainable_names()
    missing = [name for name in names if not params.has_grad(name)]
    if missing:
        raise ContractError(f"Gradients missing for: {missing}")

    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t

    for name in names:
        value = params.value(name)
        grad = params.grad(name)
        if state.weight_decay:
            grad = grad + state.weight_decay * value

        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)

        m_hat = m / bias1
        v_hat = v / bias2
        value -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)

    params.zero_grad()
