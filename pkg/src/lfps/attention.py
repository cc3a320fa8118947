"""Exact restricted attention, full/Top-k oracles, and overlap/error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import DotCounter, row_logits, softmax_weights
from .store import KvStore


@dataclass(frozen=True)
class AttentionOutput:
    """Weighted value output plus the contributing index -> weight map,
    stored as aligned arrays in ascending index order."""

    output: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def weight_map(self) -> dict[int, float]:
        return {int(i): float(w) for i, w in zip(self.indices, self.weights)}


@dataclass(frozen=True)
class OverlapReport:
    eta: float
    k: int
    intersection: int


def topk_from_scores(idx: np.ndarray, scores: np.ndarray, k: int) -> np.ndarray:
    """Top-k of (idx, scores) with lower-index tie-break; idx must be sorted
    ascending.  Bounded selection, no full sort."""
    p = idx.shape[0]
    if k >= p:
        return idx.copy()
    kth = np.partition(scores, p - k)[p - k]
    above = scores > kth
    take = idx[above]
    need = k - take.shape[0]
    if need > 0:
        eq = idx[scores == kth][:need]
        take = np.concatenate([take, eq])
    return np.sort(take)


def exact_topk_restricted(q: np.ndarray, store: KvStore, probe: np.ndarray, k: int,
                          counter: DotCounter | None = None) -> np.ndarray:
    """Exact Top-k by scaled dot product over the probe set only.

    Ties break toward the lower index.  Cost is proportional to the probe
    size, never the context length.
    """
    probe = np.asarray(probe, dtype=np.int64)
    if probe.size == 0:
        raise ValueError("probe set is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = row_logits(store.keys, q, probe, counter)
    return topk_from_scores(probe, scores, k)


def attention_output(q: np.ndarray, store: KvStore, c2: np.ndarray,
                     sink_count: int = 0,
                     counter: DotCounter | None = None) -> AttentionOutput:
    """Softmax-weighted value aggregation over c2 plus the pinned sinks.

    Sinks and selected indices are normalized jointly; the weighted sum runs
    in ascending index order.
    """
    c2 = np.asarray(c2, dtype=np.int64)
    if c2.size == 0:
        raise ValueError("selection is empty")
    if sink_count > 0:
        sinks = np.arange(sink_count, dtype=np.int64)
        idx = np.union1d(sinks, c2)
    else:
        idx = np.unique(c2)
    logits = row_logits(store.keys, q, idx, counter)
    w = softmax_weights(logits)
    out = w @ store.values[idx]
    return AttentionOutput(out, idx, w)


def full_attention_oracle(q: np.ndarray, store: KvStore) -> AttentionOutput:
    """Exact softmax attention over every stored position.  Reference
    implementation: clarity over speed."""
    n = store.n
    if n < 1:
        raise ValueError("store is empty")
    logits = store.keys @ np.asarray(q, dtype=np.float64) / math.sqrt(store.d)
    w = softmax_weights(logits)
    out = w @ store.values
    return AttentionOutput(out, np.arange(n, dtype=np.int64), w)


def topk_oracle(q: np.ndarray, store: KvStore, k: int, sink_count: int = 0) -> np.ndarray:
    """Exact Top-k over all non-sink positions, lower-index tie-break.

    Independent reference route: full descending stable sort rather than the
    bounded selection used on the probe path.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    idx = np.arange(sink_count, store.n, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("no non-sink positions")
    scores = store.keys[sink_count:] @ np.asarray(q, dtype=np.float64) / math.sqrt(store.d)
    order = np.lexsort((idx, -scores))
    return np.sort(idx[order[: min(k, idx.size)]])


def overlap_ratio(c: np.ndarray, i_exact: np.ndarray, k: int) -> OverlapReport:
    """Fraction of the exact Top-k recovered by the candidate set."""
    if k < 1:
        raise ValueError("k must be >= 1")
    i_exact = np.asarray(i_exact, dtype=np.int64)
    if i_exact.size != k:
        raise ValueError(f"exact set has {i_exact.size} indices, expected k={k}")
    inter = int(np.intersect1d(np.asarray(c, dtype=np.int64), i_exact).size)
    return OverlapReport(eta=inter / k, k=k, intersection=inter)


def output_error(approx: AttentionOutput | np.ndarray, exact: AttentionOutput | np.ndarray) -> float:
    """Relative L2 error of an approximate output against the exact one."""
    a = approx.output if isinstance(approx, AttentionOutput) else np.asarray(approx)
    e = exact.output if isinstance(exact, AttentionOutput) else np.asarray(exact)
    if a.shape != e.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {e.shape}")
    denom = max(float(np.linalg.norm(e)), 1e-12)
    return float(np.linalg.norm(a - e)) / denom
