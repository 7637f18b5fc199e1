"""
Recorded-tape reverse-mode differentiation

A Tape records one node per primitive op during the forward pass. backprop walks
the records in reverse and accumulates gradients into the ParamStore entries that
were pulled onto the tape with Tape.param. The primitive set is fixed: products,
elementwise arithmetic, reshaping, row gathers, the shrinkage threshold, softmax,
layer-norm, activations, dropout, the Taylor weights and the InfoNCE reduction.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.constants import Activation
from src.numkit.matrix import activate, activation_grad, mm, softshrink
from src.numkit.params import ParamStore
from src.utils.errors import ContractError, DimensionError, SingularityError

Operand = Union["Var", np.ndarray, float, int]
Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

LAYER_NORM_EPS = 1e-8


class Var:
    """A value on a tape"""

    __slots__ = ("value", "tape", "requires_grad")

    def __init__(self, value: np.ndarray, tape: "Tape", requires_grad: bool = False):
        self.value = value
        self.tape = tape
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() on a value of shape {self.value.shape}")
        return float(self.value.reshape(-1)[0])

    def __add__(self, other: Operand) -> "Var":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Var":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Var":
        return sub(self, other)

    def __mul__(self, other: Operand) -> "Var":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Var":
        return mul(other, self)

    def __matmul__(self, other: "Var") -> "Var":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Record:
    out: Var
    inputs: Tuple[Var, ...]
    backward: Backward


class Tape:
    """
    Forward-pass recorder

    With enabled=False nothing is recorded and Vars never require gradients,
    which is how evaluation runs the same model code.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._records: List[_Record] = []
        self._leaves: Dict[str, Var] = {}

    def __len__(self) -> int:
        return len(self._records)

    def constant(self, value: Union[np.ndarray, float]) -> Var:
        return Var(np.asarray(value, dtype=np.float64), self, False)

    def param(self, store: ParamStore, name: str) -> Var:
        """Leaf for a stored parameter (one leaf per name per tape)"""
        if name not in self._leaves:
            requires = self.enabled and store.is_trainable(name)
            self._leaves[name] = Var(store.value(name), self, requires)
        return self._leaves[name]

    def record(self, value: np.ndarray, inputs: Sequence[Var], backward: Backward) -> Var:
        requires = self.enabled and any(v.requires_grad for v in inputs)
        out = Var(value, self, requires)
        if requires:
            self._records.append(_Record(out, tuple(inputs), backward))
        return out

    def backprop(self, loss: Var, store: ParamStore) -> None:
        """
        Accumulate d(loss)/d(param) into the store for every trainable leaf

        Raises:
            ContractError: loss is not a scalar, or the tape was not recording
        """
        if loss.value.size != 1:
            raise ContractError(f"backprop needs a scalar loss, got shape {loss.value.shape}")
        if not self.enabled:
            raise ContractError("backprop on a tape that did not record")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for rec in reversed(self._records):
            g = grads.pop(id(rec.out), None)
            if g is None:
                continue
            for var, input_grad in zip(rec.inputs, rec.backward(g)):
                if input_grad is None or not var.requires_grad:
                    continue
                key = id(var)
                grads[key] = grads[key] + input_grad if key in grads else input_grad

        for name, leaf in self._leaves.items():
            if leaf.requires_grad:
                store.accumulate_grad(name, grads.get(id(leaf), np.zeros_like(leaf.value)))

    def reset(self) -> None:
        self._records.clear()
        self._leaves.clear()


# =============================================================================
# Helpers
# =============================================================================

def _tape_of(*operands: Operand) -> Tape:
    for op in operands:
        if isinstance(op, Var):
            return op.tape
    raise ContractError("At least one operand must live on a tape")


def _lift(tape: Tape, operand: Operand) -> Var:
    if isinstance(operand, Var):
        return operand
    return tape.constant(operand)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to an operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


# =============================================================================
# Primitive ops
# =============================================================================

def add(a: Operand, b: Operand) -> Var:
    tape = _tape_of(a, b)
    x, y = _lift(tape, a), _lift(tape, b)
    return tape.record(
        x.value + y.value, (x, y),
        lambda g: (_unbroadcast(g, x.shape), _unbroadcast(g, y.shape)),
    )


def sub(a: Operand, b: Operand) -> Var:
    tape = _tape_of(a, b)
    x, y = _lift(tape, a), _lift(tape, b)
    return tape.record(
        x.value - y.value, (x, y),
        lambda g: (_unbroadcast(g, x.shape), _unbroadcast(-g, y.shape)),
    )


def mul(a: Operand, b: Operand) -> Var:
    tape = _tape_of(a, b)
    x, y = _lift(tape, a), _lift(tape, b)
    return tape.record(
        x.value * y.value, (x, y),
        lambda g: (_unbroadcast(g * y.value, x.shape), _unbroadcast(g * x.value, y.shape)),
    )


def matmul(a: Var, b: Var) -> Var:
    """Product over the last two axes; leading axes broadcast"""
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"Cannot multiply {a.shape} by {b.shape}")

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (
            _unbroadcast(mm(g, _swap(b.value)), a.shape),
            _unbroadcast(mm(_swap(a.value), g), b.shape),
        )

    return a.tape.record(mm(a.value, b.value), (a, b), backward)


def transpose(a: Var) -> Var:
    """Swap the last two axes"""
    return a.tape.record(np.ascontiguousarray(_swap(a.value)), (a,), lambda g: (_swap(g),))


def permute(a: Var, axes: Tuple[int, ...]) -> Var:
    inverse = tuple(np.argsort(axes))
    return a.tape.record(
        np.ascontiguousarray(np.transpose(a.value, axes)), (a,),
        lambda g: (np.transpose(g, inverse),),
    )


def reshape(a: Var, shape: Tuple[int, ...]) -> Var:
    return a.tape.record(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def take_rows(table: Var, ids: np.ndarray) -> Var:
    """Gather rows table[ids] for an integer array of any shape"""
    index = np.asarray(ids, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise IndexError(f"Row id out of range for table with {table.shape[0]} rows")

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros_like(table.value)
        np.add.at(full, index, g)
        return (full,)

    return table.tape.record(table.value[index], (table,), backward)


def getitem(a: Var, key: Union[slice, Tuple]) -> Var:
    """Basic slicing only"""

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros_like(a.value)
        full[key] += g
        return (full,)

    return a.tape.record(a.value[key].copy(), (a,), backward)


def concat(parts: Sequence[Var], axis: int = -1) -> Var:
    tape = parts[0].tape
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> List[np.ndarray]:
        return list(np.split(g, bounds, axis=axis))

    return tape.record(np.concatenate([p.value for p in parts], axis=axis), tuple(parts), backward)


def shrink(x: Var, lam_raw: Var) -> Var:
    """
    Softshrink with a learnable threshold |lam_raw|

    Subgradient is 0 inside the dead zone and at |x| = threshold. The sign of
    lam_raw at 0 is taken as +1 so the threshold can move away from its
    zero initialisation.
    """
    threshold = float(np.abs(lam_raw.value).reshape(-1)[0])
    active = np.abs(x.value) > threshold
    sign_lam = 1.0 if float(lam_raw.value.reshape(-1)[0]) >= 0 else -1.0

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        grad_x = g * active
        grad_threshold = -np.sum(g * np.sign(x.value) * active)
        return grad_x, np.full(lam_raw.shape, grad_threshold * sign_lam)

    return x.tape.record(softshrink(x.value, threshold), (x, lam_raw), backward)


def activation(x: Var, kind: Activation) -> Var:
    if kind == Activation.IDENTITY:
        return x
    return x.tape.record(
        activate(x.value, kind), (x,),
        lambda g: (g * activation_grad(x.value, kind),),
    )


def masked_softmax(x: Var, mask: np.ndarray) -> Var:
    """
    Softmax over the last axis restricted to mask==True entries

    Fully masked rows produce all-zero weights.
    """
    keep = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    logits = np.where(keep, x.value, -np.inf)
    row_max = np.max(logits, axis=-1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    exps = np.where(keep, np.exp(logits - row_max), 0.0)
    totals = exps.sum(axis=-1, keepdims=True)
    probs = exps / np.where(totals == 0.0, 1.0, totals)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (probs * (g - np.sum(g * probs, axis=-1, keepdims=True)),)

    return x.tape.record(probs, (x,), backward)


def layer_norm(x: Var, gamma: Var, beta: Var, eps: float = LAYER_NORM_EPS) -> Var:
    """Normalise the last axis, then scale and shift"""
    centred = x.value - x.value.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(np.mean(centred ** 2, axis=-1, keepdims=True) + eps)
    normed = centred * inv_std

    def backward(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_normed = g * gamma.value
        grad_x = inv_std * (
            g_normed
            - g_normed.mean(axis=-1, keepdims=True)
            - normed * np.mean(g_normed * normed, axis=-1, keepdims=True)
        )
        return grad_x, _unbroadcast(g * normed, gamma.shape), _unbroadcast(g, beta.shape)

    return x.tape.record(normed * gamma.value + beta.value, (x, gamma, beta), backward)


def dropout(x: Var, rate: float, rng: Optional[np.random.Generator]) -> Var:
    """Inverted dropout; a no-op when rate is 0 or no generator is given"""
    if rate <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x.tape.record(x.value * keep, (x,), lambda g: (g * keep,))


def total(x: Var) -> Var:
    """Sum of all entries"""
    return x.tape.record(np.asarray(x.value.sum()), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean(x: Var) -> Var:
    n = x.value.size
    return x.tape.record(
        np.asarray(x.value.mean()), (x,),
        lambda g: (np.broadcast_to(g / n, x.shape).copy(),),
    )


def taylor_weights(alpha: Var, sigma: np.ndarray, d: int) -> Var:
    """
    sigma_1 * sum_k alpha_k (sigma_i / sigma_1)^k for i < d

    alpha is either one shared coefficient vector (n+1,) or one row per
    component (d, n+1).

    Raises:
        SingularityError: sigma_1 is zero
    """
    top = float(sigma[0])
    if top == 0.0:
        raise SingularityError("Largest singular value is zero")
    order = alpha.shape[-1] - 1
    ratios = np.asarray(sigma[:d], dtype=np.float64) / top
    powers = ratios[:, None] ** np.arange(order + 1)

    if alpha.ndim == 1:
        value = top * (powers @ alpha.value)
        return alpha.tape.record(value, (alpha,), lambda g: (top * (powers.T @ g),))

    if alpha.shape[0] != d:
        raise DimensionError(f"Per-component coefficients need {d} rows, got {alpha.shape[0]}")
    value = top * np.sum(powers * alpha.value, axis=1)
    return alpha.tape.record(value, (alpha,), lambda g: (top * powers * g[:, None],))


def diag_block(weights: Var, cols: int) -> Var:
    """d x cols matrix with weights on the leading diagonal and zeros elsewhere"""
    d = weights.shape[0]
    if cols < d:
        raise DimensionError(f"Block needs at least {d} columns, got {cols}")
    block = np.zeros((d, cols))
    block[np.arange(d), np.arange(d)] = weights.value

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (np.diagonal(g[:, :d]).copy(),)

    return weights.tape.record(block, (weights,), backward)


def infonce(logits: Var, temperature: float) -> Var:
    """
    Mean InfoNCE loss; column 0 of each row holds the positive score

    Stabilised by subtracting the row maximum before exponentiation.
    """
    if temperature <= 0:
        raise ContractError(f"temperature must be positive, got {temperature}")
    scaled = logits.value / temperature
    row_max = scaled.max(axis=1, keepdims=True)
    shifted = np.exp(scaled - row_max)
    # negatives summed in sorted order so their arrangement cannot change the result
    sums = (shifted[:, :1] + np.sort(shifted[:, 1:], axis=1).sum(axis=1, keepdims=True))
    losses = (row_max[:, 0] + np.log(sums[:, 0])) - scaled[:, 0]
    batch = logits.shape[0]

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        probs = shifted / sums
        probs[:, 0] -= 1.0
        return (g * probs / (temperature * batch),)

    return logits.tape.record(np.asarray(losses.mean()), (logits,), backward)
