"""
Central finite-difference check of tape gradients
"""

from typing import Callable, Iterable, Optional

import numpy as np

from src.numkit.autograd import Tape, Var
from src.numkit.params import ParamStore
from src.utils.errors import ContractError, EvaluationError
from src.utils.logging_config import get_logger

logger = get_logger(__name__)

LossFn = Callable[[Tape, ParamStore], Var]


def _evaluate(f: LossFn, params: ParamStore) -> float:
    value = f(Tape(enabled=False), params).item()
    if not np.isfinite(value):
        raise EvaluationError(f"Loss is not finite: {value}")
    return value


def finite_diff_gradcheck(
    f: LossFn,
    params: ParamStore,
    h: float = 1e-4,
    names: Optional[Iterable[str]] = None
) -> float:
    """
    Compare backprop gradients with central differences

    Args:
        f: builds a scalar loss on the given tape from the given store
        params: parameters to perturb (restored afterwards)
        h: perturbation size
        names: subset of trainable parameters to check (default: all)

    Returns:
        Worst per-coordinate relative error
        |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)

    Raises:
        EvaluationError: f is not finite at some evaluation point
    """
    if h <= 0:
        raise ContractError(f"h must be positive, got {h}")
    selected = list(names) if names is not None else params.trainable_names()

    params.zero_grad()
    tape = Tape()
    loss = f(tape, params)
    if not np.isfinite(loss.item()):
        raise EvaluationError(f"Loss is not finite: {loss.item()}")
    tape.backprop(loss, params)
    analytic = {name: params.grad(name).copy() for name in selected}
    params.zero_grad()

    worst = 0.0
    worst_at = ""
    for name in selected:
        flat = params.value(name).reshape(-1)
        numeric = np.zeros(flat.size)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            upper = _evaluate(f, params)
            flat[i] = original - h
            lower = _evaluate(f, params)
            flat[i] = original

            numeric[i] = (upper - lower) / (2.0 * h)

        exact = analytic[name].reshape(-1)
        scale = np.maximum(np.maximum(np.abs(exact), np.abs(numeric)), 1e-8)
        errors = np.abs(exact - numeric) / scale
        if errors.size and errors.max() > worst:
            worst = float(errors.max())
            worst_at = f"{name}[{int(errors.argmax())}]"

    logger.debug(f"GRADCHECK | params={len(selected)} | worst={worst:.3e} | at={worst_at}")
    return worst
