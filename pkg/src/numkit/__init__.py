"""
Numerical core: dense kernels, tape differentiation, parameters and Adam
"""

from src.numkit.matrix import (
    DenseMatrix,
    as_dense,
    is_deterministic,
    matmul,
    set_deterministic,
    softshrink,
)
from src.numkit.params import ParamStore
from src.numkit.autograd import Tape, Var
from src.numkit.optim import AdamState, adam_step
from src.numkit.gradcheck import finite_diff_gradcheck


def backprop(tape: Tape, loss: Var, params: ParamStore) -> None:
    """Gradients of a recorded scalar loss into the parameter store"""
    tape.backprop(loss, params)


__all__ = [
    "DenseMatrix",
    "as_dense",
    "is_deterministic",
    "matmul",
    "set_deterministic",
    "softshrink",
    "ParamStore",
    "Tape",
    "Var",
    "AdamState",
    "adam_step",
    "backprop",
    "finite_diff_gradcheck",
]
