"""Host-memory KV store: append-only per-head key/value matrices."""

from __future__ import annotations

import numpy as np


class KvStore:
    """Append-only key/value row store for one attention head.

    Rows are never mutated once written.  Appending is the only mutator:
    the new row is written into spare capacity first and the public length
    is bumped afterwards, so a concurrent reader holding a view taken at
    length n never observes a partially written row.  All state is float64.
    """

    __slots__ = ("_keys", "_values", "_n")

    def __init__(self, d: int, capacity: int = 16):
        if d < 1:
            raise ValueError(f"d must be >= 1, got {d}")
        capacity = max(int(capacity), 1)
        self._keys = np.zeros((capacity, d), dtype=np.float64)
        self._values = np.zeros((capacity, d), dtype=np.float64)
        self._n = 0

    @classmethod
    def from_matrices(cls, keys: np.ndarray, values: np.ndarray, headroom: int = 64) -> "KvStore":
        keys = np.asarray(keys, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if keys.ndim != 2 or values.ndim != 2:
            raise ValueError("keys and values must be 2-D matrices")
        if keys.shape != values.shape:
            raise ValueError(f"keys shape {keys.shape} != values shape {values.shape}")
        n, d = keys.shape
        store = cls(d, capacity=n + headroom)
        store._keys[:n] = keys
        store._values[:n] = values
        store._n = n
        return store

    @property
    def n(self) -> int:
        return self._n

    @property
    def d(self) -> int:
        return self._keys.shape[1]

    @property
    def keys(self) -> np.ndarray:
        """Read-only view of the current key rows."""
        v = self._keys[: self._n]
        v.flags.writeable = False
        return v

    @property
    def values(self) -> np.ndarray:
        """Read-only view of the current value rows."""
        v = self._values[: self._n]
        v.flags.writeable = False
        return v

    def append(self, key: np.ndarray, value: np.ndarray) -> None:
        key = np.asarray(key, dtype=np.float64)
        value = np.asarray(value, dtype=np.float64)
        d = self.d
        if key.shape != (d,):
            raise ValueError(f"key must have shape ({d},), got {key.shape}")
        if value.shape != (d,):
            raise ValueError(f"value must have shape ({d},), got {value.shape}")
        n = self._n
        if n == self._keys.shape[0]:
            self._grow()
        self._keys[n] = key
        self._values[n] = value
        self._n = n + 1

    def _grow(self) -> None:
        cap = self._keys.shape[0]
        new_cap = cap * 2
        keys = np.zeros((new_cap, self.d), dtype=np.float64)
        values = np.zeros((new_cap, self.d), dtype=np.float64)
        keys[:cap] = self._keys
        values[:cap] = self._values
        self._keys = keys
        self._values = values
