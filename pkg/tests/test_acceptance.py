"""Acceptance suite: one test per shipping criterion, each printing a
PASS line with its measured numbers (run with -s to see them on success).

Timing-sensitive tests compare both pipelines single-threaded on the same
machine (conftest pins BLAS threads) and use relaxed bars, so they are
robust to hardware differences.
"""

import math
import time
import zlib

import numpy as np
import pytest

from lfps import (LfpsConfig, grow_tables, init_tables, read_trace,
                  topk_oracle, update_tables, write_trace)
from lfps.bench import config_for_trace, exact_topk_step, run_trace, sweep
from lfps.engine import decode_step, prefill_bootstrap
from lfps.errors import TraceFormatError
from lfps.synth import SyntheticSpec, gen_synthetic
from lfps.tables import ScoreTablePair


def _report(name: str, detail: str) -> None:
    print(f"ACCEPTANCE {name}: PASS ({detail})")


def overlap_trace():
    """The planted-pattern trace shared by the overlap and expansion
    criteria: 8192 prefill, 256 steps, 3 verticals + 2 slash offsets."""
    spec = SyntheticSpec(
        n_prefill=8192, steps=256, d=64,
        vertical_positions=(1000, 3000, 6000), slash_offsets=(128, 129),
        signal_gain=5.0, noise_scale=0.5, seed=42,
        plant_band_width=25, plant_jitter=2,
        query_correlation=0.999, key_correlation=0.0,
    )
    return gen_synthetic(spec)


def bounded_weights(rng, k):
    """Normalized weights whose ratio stays below 2, so the half-uniform
    subtraction can never drive a table entry negative."""
    w = np.exp(rng.uniform(0.0, 0.5, size=k))
    return w / w.sum()


class TestScoreTableConservation:
    def test_sum_recurrence_and_recovery(self):
        start = time.perf_counter()
        rng = np.random.default_rng(0)
        cfg = LfpsConfig(d=8, s=8, r=0.95, sink_count=4)
        n0, m = 404, 400
        weights = np.zeros((8, m))
        for c in range(8):
            support = (n0 - 8 + c) - 4 + 1
            row = rng.random(support) + 1e-3
            weights[c, :support] = row / row.sum()
        tables = init_tables(weights, cfg)
        for v in tables.sums():
            assert v == pytest.approx(10.0, rel=1e-9)
        for _ in range(500):
            k = int(rng.integers(8, 40))
            sel = np.sort(rng.choice(tables.m, size=k, replace=False)) + 4
            clamps = update_tables(tables, sel, bounded_weights(rng, k), cfg)
            grow_tables(tables, cfg)
            assert clamps == 0
            for v in tables.sums():
                assert abs(v - 10.0) / 10.0 <= 1e-6
        assert tables.clamp_count == 0

        # perturbed start: sums decay back toward the fixed point
        ver = rng.random(m)
        ver *= 3.0 / ver.sum()
        sla = rng.random(m)
        sla *= 3.0 / sla.sum()
        perturbed = ScoreTablePair(ver, sla, base_index=4)
        for step in range(200):
            k = 16
            sel = np.sort(rng.choice(perturbed.m, size=k, replace=False)) + 4
            update_tables(perturbed, sel, bounded_weights(rng, k), cfg)
            grow_tables(perturbed, cfg)
        sums = perturbed.sums()
        for v in sums:
            assert abs(v - 10.0) <= 1e-3
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0
        _report("score-table-conservation",
                f"500 steps at S=10 within 1e-6, S0=3 -> {sums[0]:.6f} by step 200, "
                f"{elapsed:.2f}s")


class TestOracleEquivalence:
    def test_exhaustive_fallback_matches_oracles(self):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        steps_checked = 0
        sessions = 0
        while steps_checked < 200:
            sessions += 1
            n = int(rng.integers(64, 2049))
            d = int(rng.integers(8, 129))
            sink = int(rng.integers(1, 5))
            s = int(rng.integers(1, 9))
            cfg = LfpsConfig(d=d, s=s, sink_count=sink, local_window=6,
                             epsilon=1.0, exhaustive_fallback=True)
            keys = rng.standard_normal((n, d))
            if sessions % 3 == 0:  # force score ties
                keys[n // 2:] = keys[: n - n // 2]
            values = rng.standard_normal((n, d))
            m = n - sink
            w = np.zeros((s, m))
            for c in range(s):
                support = (n - s + c) - sink + 1
                row = rng.random(support) + 1e-3
                w[c, :support] = row / row.sum()
            ses = prefill_bootstrap(keys, values, w, rng.standard_normal(d), cfg)
            for _ in range(10):
                q = rng.standard_normal(d)
                n_now = ses.store.n
                k = max(1, round(0.02 * n_now))
                exact = topk_oracle(q, ses.store, k, sink)
                res = decode_step(ses, q, rng.standard_normal(d),
                                  rng.standard_normal(d), 0.02, cfg)
                assert not res.bypassed
                np.testing.assert_array_equal(res.candidate.c2, exact)
                # independent naive attention over sinks + the exact set
                idx = np.concatenate([np.arange(sink), exact])
                logits = [float(ses.store.keys[i] @ q) / math.sqrt(d) for i in idx]
                mx = max(logits)
                ws = [math.exp(x - mx) for x in logits]
                tot = math.fsum(ws)
                naive = np.zeros(d)
                for i, wi in zip(idx, ws):
                    naive += (wi / tot) * ses.store.values[i]
                err = np.linalg.norm(res.output - naive) / max(np.linalg.norm(naive), 1e-12)
                assert err <= 1e-9
                steps_checked += 1
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0
        _report("oracle-equivalence",
                f"{steps_checked} fuzzed steps across {sessions} sessions, "
                f"max n 2048, ties included, {elapsed:.1f}s")


class TestOverlapOnPlantedPatterns:
    def test_mean_overlap(self):
        start = time.perf_counter()
        trace = overlap_trace()
        report = run_trace(trace, budget=0.02,
                           config=config_for_trace(trace, a=0.2, epsilon=0.85, r=0.95))
        agg = report.aggregates()
        elapsed = time.perf_counter() - start
        assert agg["mean_eta"] >= 0.80
        assert elapsed < 60.0
        _report("overlap-on-planted-patterns",
                f"mean eta {agg['mean_eta']:.4f} >= 0.80 at 2% budget, "
                f"fraction {agg['mean_candidate_fraction']:.4f}, {elapsed:.1f}s")


class TestCandidateFractionMonotonicity:
    def test_fraction_non_increasing_in_a(self):
        spec = SyntheticSpec(
            n_prefill=2048, steps=96, d=64,
            vertical_positions=(400, 1000, 1600), slash_offsets=(96, 97),
            signal_gain=5.0, noise_scale=0.5, seed=13,
            plant_band_width=12, plant_jitter=2,
            query_correlation=0.999, key_correlation=0.0,
        )
        trace = gen_synthetic(spec)
        rows = sweep(trace, {"a": [0.1, 0.2, 0.3, 0.4]}, budget=0.02,
                     score_oracle=False)
        fracs = [r["mean_candidate_fraction"] for r in rows]
        for lo, hi in zip(fracs[1:], fracs[:-1]):
            assert lo <= hi + 1e-12
        _report("candidate-fraction-monotonicity",
                "fractions " + ", ".join(f"{f:.4f}" for f in fracs)
                + " over a in 0.1..0.4")


class TestBypassMonotonicity:
    def test_bypass_rate_non_increasing_in_epsilon(self):
        spec = SyntheticSpec(
            n_prefill=1024, steps=64, d=64, heads=4,
            signal_gain=0.0, noise_scale=0.5, seed=11, sink_gain=10.0,
            query_correlation=0.9, key_correlation=0.0,
        )
        trace = gen_synthetic(spec)
        grid = (0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.0)
        rates = []
        for eps in grid:
            cfg = config_for_trace(trace, epsilon=eps)
            agg = run_trace(trace, budget=0.02, config=cfg,
                            score_oracle=False).aggregates()
            rates.append(agg["bypass_rate"])
        for lo, hi in zip(rates[1:], rates[:-1]):
            assert lo <= hi + 1e-12
        assert rates[-1] == 0.0
        assert rates[0] > 0.0
        _report("bypass-monotonicity",
                "rates " + ", ".join(f"{r:.3f}" for r in rates)
                + " over eps 0.70..1.00")


class TestWorkBoundAndThroughput:
    def test_dot_count_and_speedup(self):
        start = time.perf_counter()
        spec = SyntheticSpec(
            n_prefill=65536, steps=96, d=128,
            vertical_positions=(9000, 30000, 52000), slash_offsets=(300, 301),
            signal_gain=5.0, noise_scale=0.5, seed=5,
            plant_band_width=100, plant_jitter=2,
            query_correlation=0.999, key_correlation=0.0,
        )
        trace = gen_synthetic(spec)
        cfg = config_for_trace(trace)
        h = trace.heads_data[0]
        session = prefill_bootstrap(h.prefill_keys, h.prefill_values,
                                    h.prefill_weights, h.final_query, cfg)

        # alternate blocks of steps between the two pipelines: ambient drift
        # averages out across blocks, while each pipeline keeps its natural
        # cache residency within a block (back-to-back steps, as deployed);
        # the exact step is the efficient route (BLAS scores + bounded
        # selection + joint output) against the same growing store
        lfps_ns, exact_ns, fracs = [], [], []
        block = 12
        for t in range(trace.steps):
            q = h.step_queries[t].astype(np.float64)
            n_now = session.store.n
            if (t // block) % 2 == 1:
                k = max(1, round(0.01 * n_now))
                t0 = time.perf_counter_ns()
                exact_topk_step(q, session.store, k, cfg.sink_count)
                exact_ns.append(time.perf_counter_ns() - t0)
            res = decode_step(session, q, h.step_keys[t], h.step_values[t],
                              0.01, cfg)
            if (t // block) % 2 == 0 and t % block > 0:  # skip warm-up step
                lfps_ns.append(res.timings_ns["total"])
            if not res.bypassed:
                want = (res.candidate.probe.size + cfg.local_window
                        + cfg.sink_count + 1)
                assert res.dot_products == want
                fracs.append(res.candidate.c1.size / n_now)

        frac = sum(fracs) / len(fracs)
        assert frac <= 0.05
        median_lfps = sorted(lfps_ns)[len(lfps_ns) // 2]
        median_exact = sorted(exact_ns)[len(exact_ns) // 2]
        ratio = median_exact / median_lfps
        elapsed = time.perf_counter() - start
        assert ratio >= 5.0
        assert elapsed < 120.0
        _report("work-bound-and-throughput",
                f"dot counter exact on {trace.steps} steps, fraction "
                f"{frac:.4f}, speedup {ratio:.1f}x "
                f"({median_exact / 1e6:.2f}ms vs {median_lfps / 1e6:.2f}ms), "
                f"{elapsed:.0f}s")


class TestSlashShiftCost:
    def test_update_time_size_independent(self):
        def mean_update_ns(n, steps=1000, k=64, seed=0):
            rng = np.random.default_rng(seed)
            cfg = LfpsConfig(d=8, s=2, sink_count=4)
            m = n - 4
            ver = rng.random(m)
            ver *= 10.0 / ver.sum()
            sla = rng.random(m)
            sla *= 10.0 / sla.sum()
            tables = ScoreTablePair(ver, sla, base_index=4)
            total = 0
            for _ in range(steps):
                sel = np.sort(rng.choice(tables.m, size=k, replace=False)) + 4
                w = bounded_weights(rng, k)
                t0 = time.perf_counter_ns()
                update_tables(tables, sel, w, cfg)
                total += time.perf_counter_ns() - t0
                grow_tables(tables, cfg)
            return total / steps

        small = mean_update_ns(4096)
        big = mean_update_ns(65536)
        ratio = big / small
        assert ratio <= 2.0
        _report("slash-shift-cost",
                f"mean update {small / 1e3:.1f}us at n=4096 vs "
                f"{big / 1e3:.1f}us at n=65536, ratio {ratio:.2f} <= 2")


class TestExpansionCoverage:
    def test_expansion_lifts_overlap(self):
        trace = overlap_trace()
        on = run_trace(trace, budget=0.02,
                       config=config_for_trace(trace)).aggregates()
        off = run_trace(trace, budget=0.02,
                        config=config_for_trace(trace, expansion_offsets=(0,))
                        ).aggregates()
        delta = on["mean_eta"] - off["mean_eta"]
        assert delta >= 0.01
        _report("expansion-coverage",
                f"eta {on['mean_eta']:.4f} with offsets vs "
                f"{off['mean_eta']:.4f} without, delta {delta:.4f} >= 0.01")


class TestTraceFormat:
    def test_fuzzed_roundtrips(self):
        rng = np.random.default_rng(2)
        count = 10_000
        for i in range(count):
            s = int(rng.integers(1, 4))
            sink = int(rng.integers(1, 3))
            spec = SyntheticSpec(
                n_prefill=sink + s + int(rng.integers(1, 5)),
                steps=int(rng.integers(0, 4)),
                d=int(rng.integers(1, 6)),
                layers=int(rng.integers(1, 3)), heads=int(rng.integers(1, 3)),
                s=s, sink_count=sink, seed=int(rng.integers(0, 2**63)),
                noise_scale=float(rng.uniform(0.2, 2.0)),
                query_correlation=0.0, key_correlation=0.0,
            )
            trace = gen_synthetic(spec)
            data = write_trace(trace)
            back = read_trace(data)
            assert write_trace(back) == data
        _report("trace-format-roundtrip", f"{count} fuzzed roundtrips bit-exact")

    def test_every_single_byte_corruption_rejected(self):
        spec = SyntheticSpec(n_prefill=6, steps=1, d=2, s=2, sink_count=1,
                             seed=9, query_correlation=0.0, key_correlation=0.0)
        data = write_trace(gen_synthetic(spec))
        crc_of = zlib.crc32(data)
        rejected = 0
        for i in range(len(data)):
            corrupted = bytearray(data)
            corrupted[i] ^= 0xA5
            with pytest.raises(TraceFormatError):
                read_trace(bytes(corrupted))
            rejected += 1
        assert zlib.crc32(data) == crc_of  # input untouched
        _report("trace-format-corruption",
                f"all {rejected} single-byte corruptions rejected")
