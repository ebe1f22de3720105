"""
In-memory sample cache for manifold evaluations.
Keys are the exact bytes of the base-point array, so repeated queries with the
same data hit the cache; values are stored as read-only copies.
"""

import logging
import threading
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

logger = logging.getLogger("jordangap.cache")


def array_key(arr: np.ndarray) -> Tuple:
    arr = np.ascontiguousarray(arr)
    return (arr.shape, arr.dtype.str, arr.tobytes())


class SampleCache:
    """Thread-safe map from base points to manifold values."""

    def __init__(self, name: str = "manifold"):
        self.name = name
        self._lock = threading.Lock()
        self._data: Dict[Tuple, Tuple[np.ndarray, np.ndarray]] = {}
        self.hits = 0
        self.misses = 0

    def get(self, base: np.ndarray) -> Optional[np.ndarray]:
        key = array_key(base)
        with self._lock:
            entry = self._data.get(key)
            if entry is None:
                self.misses += 1
                return None
            self.hits += 1
            return entry[1]

    def set(self, base: np.ndarray, value: np.ndarray):
        base_copy = np.array(base, copy=True)
        value_copy = np.array(value, copy=True)
        base_copy.setflags(write=False)
        value_copy.setflags(write=False)
        with self._lock:
            # duplicate concurrent solves are deterministic: last write wins
            self._data[array_key(base_copy)] = (base_copy, value_copy)

    def samples(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        with self._lock:
            return list(self._data.values())

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        return iter(self.samples())

    def clear(self):
        with self._lock:
            self._data.clear()
            self.hits = 0
            self.misses = 0
        logger.debug(f"[Cache] {self.name} cleared")

    def stats(self) -> Dict[str, int]:
        with self._lock:
            return {"size": len(self._data), "hits": self.hits, "misses": self.misses}
