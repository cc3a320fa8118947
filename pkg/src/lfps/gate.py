"""Per-head sparsity estimation and the bypass output for gated heads.

A head whose attention mass is dominated by the pinned sink tokens carries
little pattern signal; estimating that dominance from three cheap terms
(sink, log-normal global, trailing local) lets the pipeline skip selection
and table updates for the step and return a blended value vector instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import LfpsConfig
from .numerics import DotCounter, row_logits, softmax_weights
from .store import KvStore


@dataclass(frozen=True)
class HeadStats:
    """Priors captured at the end of prefill and reused for every decode step.

    sigma_hat_sq is the variance of the final prefill step's non-sink logits
    divided by that query's squared norm, so it can be rescaled by any later
    query.  Means are exact arithmetic means over the non-sink rows.
    """

    sink_keys: np.ndarray
    sink_values: np.ndarray
    mean_key: np.ndarray
    mean_value: np.ndarray
    sigma_hat_sq: float


@dataclass(frozen=True)
class SparsityEstimate:
    """Sink/global/local mass split and the resulting sink share rho.

    The three components share an arbitrary positive scale (a common
    max-shift keeps the exponentials finite); rho is exact.
    """

    w_sink: float
    w_global: float
    w_local: float
    rho: float


def compute_head_stats(store: KvStore, last_prefill_query: np.ndarray,
                       config: LfpsConfig) -> HeadStats:
    """Freeze the per-head priors from the final prefill step."""
    n, d = store.n, store.d
    sink = config.sink_count
    if n <= sink + 1:
        raise ValueError(f"need more than sink_count + 1 = {sink + 1} rows, have {n}")
    q = np.asarray(last_prefill_query, dtype=np.float64)
    if q.shape != (d,):
        raise ValueError(f"query must have shape ({d},), got {q.shape}")
    qnorm_sq = float(q @ q)
    if qnorm_sq == 0.0:
        raise ValueError("zero-norm prefill query")
    keys_ns = store.keys[sink:]
    values_ns = store.values[sink:]
    logits = keys_ns @ q / math.sqrt(d)
    sigma_sq = float(np.var(logits))
    return HeadStats(
        sink_keys=store.keys[:sink].copy(),
        sink_values=store.values[:sink].copy(),
        mean_key=keys_ns.mean(axis=0),
        mean_value=values_ns.mean(axis=0),
        sigma_hat_sq=sigma_sq / qnorm_sq,
    )


def global_exponent(q: np.ndarray, stats: HeadStats, d: int) -> float:
    """Log of the mean non-sink weight under the log-normal model: the
    geometric-mean logit plus the arithmetic-mean correction sigma^2 / 2."""
    qnorm_sq = float(q @ q)
    return float(q @ stats.mean_key) / math.sqrt(d) + qnorm_sq * stats.sigma_hat_sq / 2.0


def gate_logits(q: np.ndarray, store: KvStore, stats: HeadStats, config: LfpsConfig,
                counter: DotCounter | None = None):
    """Sink logits, trailing-window logits, and the global exponent for one
    step, computed against the pre-append store."""
    n = store.n
    if n <= config.sink_count + config.local_window:
        raise ValueError("context shorter than sink_count + local_window")
    q = np.asarray(q, dtype=np.float64)
    sink_logits = row_logits(stats.sink_keys, q, counter=counter)
    local_rows = np.arange(n - config.local_window, n, dtype=np.int64)
    local_logits = row_logits(store.keys, q, local_rows, counter)
    gexp = global_exponent(q, stats, store.d)
    if counter is not None:
        counter.add(1)  # mean-key product
    return sink_logits, local_logits, gexp


def sparsity_from_logits(sink_logits: np.ndarray, local_logits: np.ndarray,
                         global_exp: float, n_nonsink: int) -> SparsityEstimate:
    """Combine the three mass terms in log space with a shared max shift."""
    if not (np.all(np.isfinite(sink_logits)) and np.all(np.isfinite(local_logits))
            and math.isfinite(global_exp)):
        raise ValueError("non-finite logits in sparsity estimate")
    shift = max(float(sink_logits.max()), float(local_logits.max()), global_exp)
    w_sink = float(np.exp(sink_logits - shift).sum())
    w_local = float(np.exp(local_logits - shift).sum())
    w_global = math.exp(global_exp - shift) * n_nonsink
    rho = w_sink / (w_sink + w_global + w_local)
    if not math.isfinite(rho):
        raise ValueError("non-finite sparsity ratio")
    return SparsityEstimate(w_sink=w_sink, w_global=w_global, w_local=w_local, rho=rho)


def estimate_sparsity(q: np.ndarray, store: KvStore, stats: HeadStats,
                      config: LfpsConfig,
                      counter: DotCounter | None = None) -> SparsityEstimate:
    """Estimate the sink share of the head's attention mass for this step.

    Sink mass sums the exact sink exponentials; global mass models the
    non-sink bulk as log-normal around the mean key; local mass sums the
    trailing window exactly.  Costs sink_count + local_window + 1 dot
    products regardless of context length.
    """
    sink_logits, local_logits, gexp = gate_logits(q, store, stats, config, counter)
    return sparsity_from_logits(sink_logits, local_logits, gexp, store.n - config.sink_count)


def bypass_output(q: np.ndarray, stats: HeadStats, config: LfpsConfig,
                  sink_logits: np.ndarray | None = None) -> np.ndarray:
    """Output vector for a gated (highly sparse) head.

    mean_only returns the stored mean value vector.  sink_average treats the
    mean value as one pseudo entry whose logit carries the log-normal
    correction and softmax-blends it with the sink values.
    """
    if config.bypass_mode == "mean_only":
        return stats.mean_value.copy()
    q = np.asarray(q, dtype=np.float64)
    d = stats.mean_key.shape[0]
    if sink_logits is None:
        sink_logits = stats.sink_keys @ q / math.sqrt(d)
    logits = np.concatenate([sink_logits, [global_exponent(q, stats, d)]])
    w = softmax_weights(logits)
    return w[:-1] @ stats.sink_values + w[-1] * stats.mean_value
