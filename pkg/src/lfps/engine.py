"""Per-head decode orchestration: gate, select, expand, probe, output, update.

A HeadSession owns one head's KV store, score tables, and frozen priors.
Each decode step either bypasses (highly sparse head) or runs the full
candidate pipeline; both paths append the step's new KV row and extend the
tables so the table length always tracks the non-sink context length.
All computation happens before any state mutation, so a failed step leaves
the session exactly as it was.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .attention import AttentionOutput, topk_from_scores
from .candidates import CandidateSet, expand, finalize_probe_set, select_initial
from .config import LfpsConfig
from .errors import SessionRunError
from .gate import (HeadStats, SparsityEstimate, bypass_output,
                   compute_head_stats, gate_logits, sparsity_from_logits)
from .numerics import DotCounter, softmax_weights
from .store import KvStore
from .tables import ScoreTablePair, ThresholdPair, compute_thresholds, init_tables

_EXHAUSTIVE = ThresholdPair(
    tau_ver=float("-inf"), tau_sla=float("-inf"),
    mean_ver=float("-inf"), mean_sla=float("-inf"),
)

_STAGES = ("gate", "thresholds", "select", "expand", "finalize",
           "topk", "output", "update", "append")


@dataclass
class HeadSession:
    """Mutable per-head decode state.  Single-writer; safe to hand between
    workers at step boundaries."""

    store: KvStore
    tables: ScoreTablePair
    stats: HeadStats
    config: LfpsConfig
    step: int = 0


@dataclass(frozen=True)
class StepResult:
    """Everything observable about one decode step."""

    output: np.ndarray
    candidate: CandidateSet
    bypassed: bool
    rho: float
    sparsity: SparsityEstimate
    timings_ns: dict[str, int]
    dot_products: int
    clamp_count: int
    c0_dropped: int
    n_context: int
    attention: AttentionOutput | None = field(default=None, repr=False)


def prefill_bootstrap(keys: np.ndarray, values: np.ndarray, prefill_weights,
                      last_query: np.ndarray, config: LfpsConfig) -> HeadSession:
    """Build a decode session from offloaded prefill state.

    keys/values are the full n x d prefill matrices; prefill_weights holds
    the trailing s steps' non-sink attention weights (chronological, zero
    beyond each step's causal extent); last_query is the final prefill query
    used to freeze the head priors.
    """
    keys = np.asarray(keys, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if keys.ndim != 2 or keys.shape[1] != config.d:
        raise ValueError(f"keys must be (n, {config.d})")
    n = keys.shape[0]
    if n <= config.sink_count + config.s:
        raise ValueError(
            f"prefill needs more than sink_count + s = {config.sink_count + config.s} rows, got {n}")
    w = np.asarray(prefill_weights, dtype=np.float64)
    if w.shape != (config.s, n - config.sink_count):
        raise ValueError(
            f"prefill weights must be ({config.s}, {n - config.sink_count}), got {w.shape}")
    sums = w.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-4):
        raise ValueError("each prefill weight vector must sum to 1 over its non-sink range")
    store = KvStore.from_matrices(keys, values)
    tables = init_tables(w, config)
    stats = compute_head_stats(store, last_query, config)
    return HeadSession(store=store, tables=tables, stats=stats, config=config)


def decode_step(session: HeadSession, q: np.ndarray, new_key: np.ndarray,
                new_value: np.ndarray, k_fraction: float,
                config: LfpsConfig | None = None) -> StepResult:
    """Run one decode step and append the step's new KV row.

    Stage order: sparsity gate; on bypass return the blended output with no
    selection and no table update.  Otherwise thresholds, initial selection,
    expansion, local-window merge, exact Top-k over the probe set, joint
    sink+selection output, and the decayed table update.  The new KV row is
    appended and the tables grown in both paths.
    """
    cfg = config if config is not None else session.config
    store, tables, stats = session.store, session.tables, session.stats
    d = store.d
    q = np.asarray(q, dtype=np.float64)
    new_key = np.asarray(new_key, dtype=np.float64)
    new_value = np.asarray(new_value, dtype=np.float64)
    for name, vec in (("q", q), ("new_key", new_key), ("new_value", new_value)):
        if vec.shape != (d,):
            raise ValueError(f"{name} must have shape ({d},), got {vec.shape}")
    if not 0.0 < k_fraction <= 1.0:
        raise ValueError(f"k_fraction must be in (0, 1], got {k_fraction}")
    if tables.m != store.n - cfg.sink_count:
        raise ValueError("tables out of sync with the KV store")

    counter = DotCounter()
    timings = dict.fromkeys(_STAGES, 0)
    t_start = time.perf_counter_ns()

    t0 = t_start
    sink_logits, local_logits, gexp = gate_logits(q, store, stats, cfg, counter)
    est = sparsity_from_logits(sink_logits, local_logits, gexp,
                               store.n - cfg.sink_count)
    timings["gate"] = time.perf_counter_ns() - t0

    n = store.n
    if est.rho > cfg.epsilon:
        out = bypass_output(q, stats, cfg, sink_logits=sink_logits)
        t0 = time.perf_counter_ns()
        store.append(new_key, new_value)
        tables.grow()
        timings["append"] = time.perf_counter_ns() - t0
        timings["total"] = time.perf_counter_ns() - t_start
        session.step += 1
        return StepResult(
            output=out, candidate=CandidateSet(budget_k=0), bypassed=True,
            rho=est.rho, sparsity=est, timings_ns=timings,
            dot_products=counter.count, clamp_count=0, c0_dropped=0,
            n_context=n,
        )

    t0 = time.perf_counter_ns()
    if cfg.exhaustive_fallback:
        thresholds = _EXHAUSTIVE
    else:
        thresholds = compute_thresholds(tables, cfg)
    timings["thresholds"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    c0 = select_initial(tables, thresholds)
    timings["select"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    c1 = expand(c0, tables, thresholds, cfg)
    timings["expand"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    probe = finalize_probe_set(c1, store, cfg)
    timings["finalize"] = time.perf_counter_ns() - t0

    k = max(1, round(k_fraction * n))
    t0 = time.perf_counter_ns()
    probe_logits = store.keys[probe] @ q / math.sqrt(d)
    counter.add(probe.size)
    c2 = topk_from_scores(probe, probe_logits, k)
    timings["topk"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    c2_pos = np.searchsorted(probe, c2)
    c2_logits = probe_logits[c2_pos]
    att_idx = np.concatenate([np.arange(cfg.sink_count, dtype=np.int64), c2])
    att_w = softmax_weights(np.concatenate([sink_logits, c2_logits]))
    out_vec = att_w @ store.values[att_idx]
    attention = AttentionOutput(out_vec, att_idx, att_w)
    timings["output"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    update_weights = softmax_weights(c2_logits)
    clamps = tables.update(c2 - tables.base_index, update_weights, cfg.r)
    timings["update"] = time.perf_counter_ns() - t0

    t0 = time.perf_counter_ns()
    store.append(new_key, new_value)
    tables.grow()
    timings["append"] = time.perf_counter_ns() - t0

    timings["total"] = time.perf_counter_ns() - t_start
    session.step += 1
    cand = CandidateSet(c0=c0, c1=c1, probe=probe, c2=c2, budget_k=k)
    return StepResult(
        output=out_vec, candidate=cand, bypassed=False, rho=est.rho,
        sparsity=est, timings_ns=timings, dot_products=counter.count,
        clamp_count=clamps, c0_dropped=cand.c0_dropped, n_context=n,
        attention=attention,
    )


def run_session(session: HeadSession, steps, k_fraction: float,
                config: LfpsConfig | None = None) -> list[StepResult]:
    """Apply decode_step over a (q, new_key, new_value) stream.

    Deterministic given identical inputs.  The first failing step raises
    SessionRunError carrying the completed results.
    """
    results: list[StepResult] = []
    for i, (q, new_key, new_value) in enumerate(steps):
        try:
            results.append(decode_step(session, q, new_key, new_value, k_fraction, config))
        except Exception as e:  # noqa: BLE001 - context preserved on the error
            raise SessionRunError(i, results, e) from e
    if not results:
        raise ValueError("decode stream is empty")
    return results


__all__ = [
    "HeadSession", "StepResult", "prefill_bootstrap", "decode_step",
    "run_session",
]
