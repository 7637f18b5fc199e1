"""
Caching utilities for SpecTran

Decompositions of the semantic matrix are the one expensive, reusable result
in a run; they are memoized in memory and on disk keyed by the matrix bytes.
"""

import hashlib
from pathlib import Path
from typing import Any, Callable, Dict, Optional, TypeVar, Union

import joblib
import numpy as np

from src.utils.logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar("T")


def matrix_digest(matrix: np.ndarray, tag: str = "") -> str:
    """SHA-256 of a matrix's shape, dtype and contiguous bytes"""
    array = np.ascontiguousarray(matrix)
    hasher = hashlib.sha256()
    hasher.update(tag.encode("utf-8"))
    hasher.update(str(array.shape).encode("utf-8"))
    hasher.update(str(array.dtype).encode("utf-8"))
    hasher.update(array.tobytes())
    return hasher.hexdigest()[:32]


class FactorCache:
    """
    Memoizes results computed from a dense matrix

    Memory is checked first, then the joblib files under cache_dir.
    """

    def __init__(
        self,
        cache_dir: Optional[Union[str, Path]] = None,
        enabled: bool = True,
        max_memory_items: int = 8
    ):
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.enabled = enabled
        self.max_memory_items = max_memory_items
        self._memory: Dict[str, Any] = {}
        self.hits = 0
        self.misses = 0

        if self.cache_dir and self.enabled:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _file(self, key: str) -> Optional[Path]:
        return self.cache_dir / f"{key}.joblib" if self.cache_dir else None

    def get(self, key: str) -> Optional[Any]:
        if not self.enabled:
            return None
        if key in self._memory:
            return self._memory[key]
        cache_file = self._file(key)
        if cache_file is not None and cache_file.exists():
            try:
                value = joblib.load(cache_file)
            except Exception as e:
                logger.warning(f"CACHE_READ_FAILED | key={key} | error={e}")
                return None
            self._remember(key, value)
            return value
        return None

    def set(self, key: str, value: Any) -> None:
        if not self.enabled:
            return
        self._remember(key, value)
        cache_file = self._file(key)
        if cache_file is not None:
            try:
                joblib.dump(value, cache_file)
            except Exception as e:
                logger.warning(f"CACHE_WRITE_FAILED | key={key} | error={e}")

    def get_or_compute(self, matrix: np.ndarray, compute: Callable[[np.ndarray], T], tag: str = "") -> T:
        """Return the cached result for this matrix or compute and store it"""
        key = matrix_digest(matrix, tag)
        cached = self.get(key)
        if cached is not None:
            self.hits += 1
            logger.debug(f"CACHE_HIT | key={key}")
            return cached
        self.misses += 1
        result = compute(matrix)
        self.set(key, result)
        return result

    def clear(self, memory_only: bool = False) -> int:
        """Drop cached entries; returns how many were removed"""
        count = len(self._memory)
        self._memory.clear()
        if not memory_only and self.cache_dir and self.cache_dir.exists():
            for cache_file in self.cache_dir.glob("*.joblib"):
                cache_file.unlink()
                count += 1
        return count

    def _remember(self, key: str, value: Any) -> None:
        if len(self._memory) >= self.max_memory_items:
            self._memory.pop(next(iter(self._memory)))
        self._memory[key] = value

    def get_stats(self) -> dict:
        return {
            "memory_items": len(self._memory),
            "hits": self.hits,
            "misses": self.misses,
            "enabled": self.enabled,
        }


# Global cache instance
_global_cache: Optional[FactorCache] = None


def get_factor_cache() -> FactorCache:
    """Get the process-wide factor cache configured from settings"""
    global _global_cache
    if _global_cache is None:
        from src.config.settings import get_settings
        settings = get_settings()
        _global_cache = FactorCache(
            cache_dir=settings.cache_path,
            enabled=settings.cache_enabled
        )
    return _global_cache
