"""Shared numeric primitives: restricted softmax, central moments, dot kernels."""

from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np


class DotCounter:
    """Counts key-row dot products, for work-bound instrumentation."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


def dot_reference(a, b) -> float:
    """Fixed-order scalar dot product; the reference all vectorized kernels
    are checked against."""
    acc = 0.0
    for x, y in zip(np.asarray(a, dtype=np.float64).tolist(),
                    np.asarray(b, dtype=np.float64).tolist()):
        acc += x * y
    return acc


def row_logits(keys: np.ndarray, q: np.ndarray, rows=None,
               counter: DotCounter | None = None) -> np.ndarray:
    """Scaled scores q . K_i / sqrt(d) for the given rows (all rows if None).

    Vectorized kernel; must agree with dot_reference to 1e-6 relative.
    """
    d = keys.shape[1]
    if rows is None:
        out = keys @ q
        hit = keys.shape[0]
    else:
        out = keys[rows] @ q
        hit = len(rows)
    if counter is not None:
        counter.add(hit)
    out /= math.sqrt(d)
    return out


def softmax_weights(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over a score vector.

    Max-subtraction keeps exponentials in range; weights are positive and
    sum to 1.  Empty or non-finite input is rejected.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.size == 0:
        raise ValueError("softmax over an empty score set")
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax input contains non-finite scores")
    shifted = logits - logits.max()
    w = np.exp(shifted)
    w /= w.sum()
    return w


def softmax_restricted(scores: Mapping[int, float]) -> dict[int, float]:
    """Softmax over an index -> score mapping, returned as index -> weight.

    Indices are processed in ascending order so the result is deterministic
    regardless of mapping iteration order.
    """
    if len(scores) == 0:
        raise ValueError("softmax over an empty score set")
    idx = sorted(scores)
    w = softmax_weights(np.array([scores[i] for i in idx], dtype=np.float64))
    return {i: float(wi) for i, wi in zip(idx, w)}


def moments(x) -> tuple[float, float, float]:
    """Mean and centered power sums of a score vector.

    Returns (mean, sum (x - mean)^2, sum (x - mean)^4) using an exact
    two-pass computation.  Length must be >= 1.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("moments of an empty vector")
    mean = float(x.mean())
    c = x - mean
    c2 = c * c
    s2 = float(c2.sum())
    s4 = float(np.dot(c2, c2))
    return mean, s2, s4
