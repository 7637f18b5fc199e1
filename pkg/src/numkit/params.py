"""
Named parameter storage with matching gradient buffers
"""

from typing import Dict, Iterator, List, Optional, Set

import numpy as np

from src.utils.errors import ContractError, DimensionError


class ParamStore:
    """
    Named parameter tensors, each paired with one gradient buffer of the same shape

    Non-trainable entries are stored alongside (they are read by the model but
    never updated by the optimizer and never counted as trainable).
    """

    def __init__(self):
        self._values: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}
        self._trainable: Dict[str, bool] = {}
        self._populated: Set[str] = set()

    def register(self, name: str, value: np.ndarray, trainable: bool = True) -> np.ndarray:
        """Add a parameter; names must be unique"""
        if name in self._values:
            raise ContractError(f"Parameter already registered: {name}")
        array = np.array(value, dtype=np.float64, copy=True)
        self._values[name] = array
        self._grads[name] = np.zeros_like(array)
        self._trainable[name] = trainable
        return array

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __len__(self) -> int:
        return len(self._values)

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def names(self) -> List[str]:
        return list(self._values)

    def trainable_names(self) -> List[str]:
        return [name for name, flag in self._trainable.items() if flag]

    def is_trainable(self, name: str) -> bool:
        return self._trainable[self._require(name)]

    def value(self, name: str) -> np.ndarray:
        """The stored array itself (mutations are visible to the store)"""
        return self._values[self._require(name)]

    def set_value(self, name: str, value: np.ndarray) -> None:
        current = self._values[self._require(name)]
        array = np.asarray(value, dtype=np.float64)
        if array.shape != current.shape:
            raise DimensionError(f"{name}: expected shape {current.shape}, got {array.shape}")
        current[...] = array

    def grad(self, name: str) -> np.ndarray:
        return self._grads[self._require(name)]

    def set_grad(self, name: str, grad: np.ndarray) -> None:
        buffer = self._grads[self._require(name)]
        array = np.asarray(grad, dtype=np.float64)
        if array.shape != buffer.shape:
            raise DimensionError(f"grad of {name}: expected shape {buffer.shape}, got {array.shape}")
        buffer[...] = array
        self._populated.add(name)

    def accumulate_grad(self, name: str, grad: np.ndarray) -> None:
        buffer = self._grads[self._require(name)]
        buffer += np.reshape(grad, buffer.shape)
        self._populated.add(name)

    def has_grad(self, name: str) -> bool:
        return name in self._populated

    def zero_grad(self) -> None:
        for buffer in self._grads.values():
            buffer.fill(0.0)
        self._populated.clear()

    def num_trainable(self) -> int:
        """Exact count of trainable scalars"""
        return int(sum(self._values[name].size for name in self.trainable_names()))

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Deep copy of all values (read-only view for evaluation or best-checkpoint keeping)"""
        return {name: value.copy() for name, value in self._values.items()}

    def load_snapshot(self, snapshot: Dict[str, np.ndarray], strict: bool = True) -> None:
        for name, value in snapshot.items():
            if name not in self._values:
                if strict:
                    raise ContractError(f"Unknown parameter in snapshot: {name}")
                continue
            self.set_value(name, value)
        if strict:
            missing = set(self._values) - set(snapshot)
            if missing:
                raise ContractError(f"Snapshot is missing parameters: {sorted(missing)}")

    def global_norm(self, names: Optional[List[str]] = None) -> Dict[str, float]:
        """Frobenius norm per parameter (diagnostics)"""
        selected = names if names is not None else self.names()
        return {name: float(np.linalg.norm(self._values[name])) for name in selected}

    def _require(self, name: str) -> str:
        if name not in self._values:
            raise ContractError(f"Unknown parameter: {name}")
        return name
