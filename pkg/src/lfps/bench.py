"""Trace runners: the tracked pipeline, the exact Top-k reference, and full
attention, with per-step oracle scoring and parameter sweeps."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .attention import (attention_output, full_attention_oracle, overlap_ratio,
                        output_error, topk_from_scores, topk_oracle)
from .config import LfpsConfig
from .engine import decode_step, prefill_bootstrap
from .numerics import softmax_weights
from .report import RunReport, StepRecord, compute_aggregates
from .store import KvStore
from .tracefile import TraceFile

MODES = ("lfps", "topk_oracle", "full")


def config_for_trace(trace: TraceFile, *, r: float = 0.95, epsilon: float = 0.85,
                     a: float = 0.2, local_window: int = 6,
                     expansion_offsets=(-1, 0, 1, 2), bypass_mode: str = "sink_average",
                     exhaustive_fallback: bool = False) -> LfpsConfig:
    """Config whose structural fields (d, s, sink_count) come from the trace."""
    return LfpsConfig(
        d=trace.d, s=trace.s, r=r, epsilon=epsilon, a=a,
        expansion_offsets=tuple(expansion_offsets), sink_count=trace.sink_count,
        local_window=local_window, bypass_mode=bypass_mode,
        exhaustive_fallback=exhaustive_fallback,
    )


def _check_trace_config(trace: TraceFile, config: LfpsConfig) -> None:
    if config.d != trace.d:
        raise ValueError(f"config d={config.d} but trace d={trace.d}")
    if config.s != trace.s:
        raise ValueError(f"config s={config.s} but trace s={trace.s}")
    if config.sink_count != trace.sink_count:
        raise ValueError(
            f"config sink_count={config.sink_count} but trace sink_count={trace.sink_count}")


def _snapshot(store: KvStore, n: int) -> KvStore:
    """Read-only restriction of a store to its first n rows (zero-copy)."""
    snap = KvStore.__new__(KvStore)
    snap._keys = store._keys[:n]
    snap._values = store._values[:n]
    snap._n = n
    return snap


def _record(layer: int, head: int, step: int, n: int, res, eta, err, oracle_ns):
    cand = res.candidate
    return StepRecord(
        layer=layer, head=head, step=step, n=n, bypassed=res.bypassed,
        rho=res.rho, eta=eta,
        c0_size=int(cand.c0.size), c1_size=int(cand.c1.size),
        probe_size=int(cand.probe.size), c2_size=int(cand.c2.size),
        budget_k=cand.budget_k,
        candidate_fraction=cand.c1.size / n,
        probe_fraction=cand.probe.size / n,
        output_error=err, clamp_count=res.clamp_count,
        c0_dropped=res.c0_dropped, dot_products=res.dot_products,
        timings_ns=res.timings_ns, oracle_ns=oracle_ns,
    )


def exact_topk_step(q: np.ndarray, store: KvStore, k: int, sink: int):
    """One efficient exact-Top-k decode step: full-range scaled dots,
    bounded selection, joint sink+selection output.  This is the fair
    baseline LFPS steps are timed against."""
    scores = store.keys[sink:] @ q / math.sqrt(store.d)
    idx = np.arange(sink, store.n, dtype=np.int64)
    sel = topk_from_scores(idx, scores, k)
    return sel, attention_output(q, store, sel, sink)


def _run_head_reference(trace: TraceFile, index: int, config: LfpsConfig,
                        budget: float, mode: str, score_oracle: bool) -> list[StepRecord]:
    """Exact Top-k or full attention over the same stream, timed per step."""
    layer, head = divmod(index, trace.heads)
    h = trace.heads_data[index]
    store = KvStore.from_matrices(h.prefill_keys, h.prefill_values)
    records = []
    sink = config.sink_count
    for t in range(trace.steps):
        n = store.n
        q = np.asarray(h.step_queries[t], dtype=np.float64)
        t0 = time.perf_counter_ns()
        if mode == "topk_oracle":
            k = max(1, round(budget * n))
            sel, out = exact_topk_step(q, store, k, sink)
            probe_size = int(sel.size)
        else:
            k = 0
            sel = np.empty(0, dtype=np.int64)
            out = full_attention_oracle(q, store)
            probe_size = n - sink
        total_ns = time.perf_counter_ns() - t0
        err = None
        oracle_ns = None
        if score_oracle:
            o0 = time.perf_counter_ns()
            err = output_error(out, full_attention_oracle(q, store))
            oracle_ns = time.perf_counter_ns() - o0
        store.append(h.step_keys[t], h.step_values[t])
        timings = {"total": total_ns}
        records.append(StepRecord(
            layer=layer, head=head, step=t, n=n, bypassed=False, rho=0.0,
            eta=None, c0_size=0, c1_size=0, probe_size=probe_size,
            c2_size=int(sel.size), budget_k=k,
            candidate_fraction=probe_size / n,
            probe_fraction=probe_size / n,
            output_error=err, clamp_count=0, c0_dropped=0,
            dot_products=n - sink, timings_ns=timings, oracle_ns=oracle_ns,
        ))
    return records


def run_trace(trace: TraceFile, mode: str = "lfps", budget: float = 0.02,
              config: LfpsConfig | None = None, threads: int | None = None,
              score_oracle: bool = True, snapshot_tables: bool = False,
              trace_path: str | None = None) -> RunReport:
    """Run a trace under the given mode and assemble a report.

    In "lfps" mode each step is also scored against the exact Top-k and
    full-attention oracles unless score_oracle is False; oracle work happens
    outside the timed stages.  Heads run in parallel across `threads`
    workers (env LFPS_THREADS, default 1); records are merged in a stable
    (layer, head, step) order, so the report is identical for any thread
    count.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if trace.steps < 1:
        raise ValueError("trace has no decode steps")
    if config is None:
        config = config_for_trace(trace)
    _check_trace_config(trace, config)
    if threads is None:
        threads = int(os.environ.get("LFPS_THREADS", "1"))
    threads = max(1, threads)

    indices = list(range(trace.head_count))
    snapshots: dict | None = {} if snapshot_tables else None

    def work(i: int) -> list[StepRecord]:
        if mode == "lfps":
            recs, tables = _run_head_lfps_with_tables(trace, i, config, budget, score_oracle)
            if snapshots is not None:
                snapshots[str(i)] = tables
            return recs
        return _run_head_reference(trace, i, config, budget, mode, score_oracle)

    if threads == 1 or len(indices) == 1:
        per_head = [work(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_head = list(pool.map(work, indices))

    records = [r for recs in per_head for r in recs]
    records.sort(key=lambda r: (r.layer, r.head, r.step))
    report = RunReport(
        config=config.as_dict(),
        run={
            "mode": mode, "budget_fraction": budget, "threads": threads,
            "oracle": score_oracle, "trace_path": trace_path,
            "layers": trace.layers, "heads": trace.heads, "d": trace.d,
            "n_prefill": trace.n_prefill, "steps": trace.steps,
        },
        records=records,
        instrumentation={
            "oracle_steps": sum(1 for r in records if r.oracle_ns is not None),
            "probe_dot_products": sum(r.dot_products for r in records),
        },
        table_snapshot=snapshots,
    )
    return report


def _run_head_lfps_with_tables(trace, index, config, budget, score_oracle):
    layer, head = divmod(index, trace.heads)
    h = trace.heads_data[index]
    session = prefill_bootstrap(h.prefill_keys, h.prefill_values,
                                h.prefill_weights, h.final_query, config)
    records = []
    for t in range(trace.steps):
        n = session.store.n
        res = decode_step(session, h.step_queries[t], h.step_keys[t],
                          h.step_values[t], budget, config)
        eta = None
        err = None
        oracle_ns = None
        if score_oracle:
            # the reference pipeline runs against the pre-append context the
            # step saw; oracle_ns times a faithful exact-Top-k step
            ref_store = _snapshot(session.store, n)
            q = np.asarray(h.step_queries[t], dtype=np.float64)
            k = res.candidate.budget_k or max(1, round(budget * n))
            o0 = time.perf_counter_ns()
            exact = topk_oracle(q, ref_store, k, config.sink_count)
            attention_output(q, ref_store, exact, config.sink_count)
            oracle_ns = time.perf_counter_ns() - o0
            if not res.bypassed:
                eta = overlap_ratio(res.candidate.c2, exact, exact.size).eta
            full = full_attention_oracle(q, ref_store)
            err = output_error(res.output, full.output)
        records.append(_record(layer, head, t, n, res, eta, err, oracle_ns))
    tables = {
        "ver": session.tables.ver_values().tolist(),
        "sla": session.tables.sla_values().tolist(),
    }
    return records, tables


def sweep(trace: TraceFile, grid: dict[str, list[float]], mode: str = "lfps",
          budget: float = 0.02, base_config: LfpsConfig | None = None,
          threads: int | None = None, score_oracle: bool = True,
          trace_path: str | None = None) -> list[dict]:
    """Run the trace once per grid point over one or two swept parameters.

    grid maps parameter names (a, epsilon, r, budget) to value lists.
    Returns one row per point: the swept values plus the run aggregates.
    """
    if not 1 <= len(grid) <= 2:
        raise ValueError("sweep grid must cover one or two parameters")
    for name, vals in grid.items():
        if name not in ("a", "epsilon", "r", "budget"):
            raise ValueError(f"cannot sweep parameter {name!r}")
        if not vals:
            raise ValueError(f"empty value list for swept parameter {name!r}")
    if base_config is None:
        base_config = config_for_trace(trace)

    names = list(grid)
    points: list[dict] = []
    combos = [(v,) for v in grid[names[0]]]
    if len(names) == 2:
        combos = [(v1, v2) for v1 in grid[names[0]] for v2 in grid[names[1]]]
    for combo in combos:
        params = dict(zip(names, combo))
        cfg_kwargs = {
            "r": base_config.r, "epsilon": base_config.epsilon, "a": base_config.a,
            "local_window": base_config.local_window,
            "expansion_offsets": base_config.expansion_offsets,
            "bypass_mode": base_config.bypass_mode,
            "exhaustive_fallback": base_config.exhaustive_fallback,
        }
        point_budget = params.pop("budget", budget)
        cfg_kwargs.update(params)
        cfg = config_for_trace(trace, **cfg_kwargs)
        report = run_trace(trace, mode=mode, budget=point_budget, config=cfg,
                           threads=threads, score_oracle=score_oracle,
                           trace_path=trace_path)
        row = dict(zip(names, combo))
        row.update(report.aggregates())
        points.append(row)
    return points


def monotonicity_verdicts(grid: dict[str, list[float]], rows: list[dict]) -> dict[str, bool]:
    """Trend checks over a 1-D sweep: candidate fraction must not grow with
    a; bypass rate must not grow with epsilon."""
    verdicts: dict[str, bool] = {}
    if len(grid) != 1:
        return verdicts
    (name, values), = grid.items()
    order = sorted(range(len(values)), key=lambda i: values[i])
    if name == "a":
        fr = [rows[i]["mean_candidate_fraction"] for i in order]
        verdicts["candidate_fraction_nonincreasing_in_a"] = all(
            fr[i + 1] <= fr[i] + 1e-12 for i in range(len(fr) - 1))
    if name == "epsilon":
        br = [rows[i]["bypass_rate"] for i in order]
        verdicts["bypass_rate_nonincreasing_in_epsilon"] = all(
            br[i + 1] <= br[i] + 1e-12 for i in range(len(br) - 1))
    return verdicts
