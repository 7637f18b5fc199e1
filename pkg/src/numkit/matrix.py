"""
Dense matrix primitives

Matrices are float64 numpy arrays. In deterministic mode every product goes
through a fixed-order einsum kernel (no BLAS threading), so repeated runs are
bitwise identical; parallel mode hands products to numpy's BLAS-backed matmul.
"""

from typing import Union

import numpy as np
import numpy.typing as npt

from src.config.constants import Activation
from src.utils.errors import ContractError, DataError, DimensionError

DenseMatrix = npt.NDArray[np.float64]
ArrayLike = Union[npt.ArrayLike, DenseMatrix]

_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_K = 0.044715

_deterministic = True


def set_deterministic(flag: bool) -> None:
    """Select the fixed-order kernel (True) or BLAS matmul (False)"""
    global _deterministic
    _deterministic = bool(flag)


def is_deterministic() -> bool:
    return _deterministic


def as_dense(value: ArrayLike, name: str = "matrix") -> DenseMatrix:
    """
    Coerce to a finite 2-D float64 matrix

    Raises:
        DimensionError: input is not 2-D
        DataError: input has NaN or Inf entries
    """
    matrix = np.asarray(value, dtype=np.float64)
    if matrix.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {matrix.shape}")
    ensure_finite(matrix, name)
    return matrix


def ensure_finite(value: np.ndarray, name: str = "value") -> None:
    if not np.all(np.isfinite(value)):
        raise DataError(f"{name} contains non-finite entries")


def mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched product over the last two axes, without shape validation"""
    if _deterministic:
        return np.einsum("...ik,...kj->...ij", a, b)
    return np.matmul(a, b)


def matmul(a: ArrayLike, b: ArrayLike) -> DenseMatrix:
    """
    Matrix product a @ b

    Raises:
        DimensionError: a.cols != b.rows, or operands are not 2-D
        DataError: operands or result contain non-finite entries
    """
    left = as_dense(a, "left operand")
    right = as_dense(b, "right operand")
    if left.shape[1] != right.shape[0]:
        raise DimensionError(
            f"Cannot multiply {left.shape[0]}x{left.shape[1]} by {right.shape[0]}x{right.shape[1]}"
        )
    product = mm(left, right)
    ensure_finite(product, "matmul result")
    return product


def softshrink(x: ArrayLike, lam: float) -> np.ndarray:
    """
    Elementwise shrinkage: x-lam above lam, x+lam below -lam, 0 in between

    Raises:
        ContractError: lam is negative
    """
    if lam < 0:
        raise ContractError(f"softshrink threshold must be non-negative, got {lam}")
    values = np.asarray(x, dtype=np.float64)
    return np.where(values > lam, values - lam, np.where(values < -lam, values + lam, 0.0))


def activate(x: np.ndarray, kind: Activation) -> np.ndarray:
    """Apply a pointwise activation"""
    if kind == Activation.GELU:
        return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_K * x ** 3)))
    if kind == Activation.RELU:
        return np.maximum(x, 0.0)
    return x


def activation_grad(x: np.ndarray, kind: Activation) -> np.ndarray:
    """Derivative of an activation at x (ReLU subgradient 0 at the kink)"""
    if kind == Activation.GELU:
        inner = _GELU_C * (x + _GELU_K * x ** 3)
        tanh_inner = np.tanh(inner)
        sech2 = 1.0 - tanh_inner ** 2
        return 0.5 * (1.0 + tanh_inner) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3.0 * _GELU_K * x ** 2)
    if kind == Activation.RELU:
        return (x > 0.0).astype(np.float64)
    return np.ones_like(x)
