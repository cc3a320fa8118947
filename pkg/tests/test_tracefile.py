"""Binary trace container: roundtrips, validation order, corruption handling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfps import (BadMagicError, ChecksumError, LayoutError, TraceFormatError,
                  TruncatedFileError, UnsupportedVersionError, read_trace,
                  write_trace)
from lfps.synth import SyntheticSpec, gen_synthetic
from lfps.tracefile import HeadTrace, TraceFile


def tiny_trace(seed=0, **kw):
    spec = SyntheticSpec(
        n_prefill=kw.pop("n_prefill", 12), steps=kw.pop("steps", 3),
        d=kw.pop("d", 4), s=kw.pop("s", 2), sink_count=kw.pop("sink_count", 1),
        seed=seed, **kw)
    return gen_synthetic(spec)


def traces_equal(a: TraceFile, b: TraceFile) -> bool:
    if (a.layers, a.heads, a.d, a.n_prefill, a.steps, a.s, a.sink_count) != \
       (b.layers, b.heads, b.d, b.n_prefill, b.steps, b.s, b.sink_count):
        return False
    for ha, hb in zip(a.heads_data, b.heads_data):
        for f in ("prefill_keys", "prefill_values", "prefill_weights",
                  "final_query", "step_queries", "step_keys", "step_values"):
            x, y = getattr(ha, f), getattr(hb, f)
            if x.shape != y.shape or not np.array_equal(
                    x.view(np.uint32), y.view(np.uint32)):
                return False
    return True


class TestRoundtrip:
    def test_minimal_single_head_single_step(self):
        t = tiny_trace(steps=1)
        data = write_trace(t)
        back = read_trace(data)
        assert traces_equal(t, back)
        assert write_trace(back) == data

    def test_prefill_only(self):
        t = tiny_trace(steps=0)
        back = read_trace(write_trace(t))
        assert back.steps == 0
        assert traces_equal(t, back)

    def test_multi_layer_multi_head(self):
        t = tiny_trace(layers=2, heads=3, steps=2)
        assert traces_equal(t, read_trace(write_trace(t)))

    def test_large_row_count_roundtrip(self):
        t = tiny_trace(n_prefill=131072, steps=1, d=2, s=2, sink_count=1)
        data = write_trace(t)
        back = read_trace(data)
        assert traces_equal(t, back)

    @given(st.integers(0, 2**31), st.integers(1, 2), st.integers(1, 2),
           st.integers(1, 3), st.integers(0, 3))
    @settings(max_examples=40, deadline=None)
    def test_roundtrip_property(self, seed, layers, heads, s, steps):
        sink = 1
        t = tiny_trace(seed=seed, layers=layers, heads=heads, s=s, steps=steps,
                       n_prefill=sink + s + 3)
        assert traces_equal(t, read_trace(write_trace(t)))


class TestGenerator:
    def test_same_seed_byte_identical(self):
        a = write_trace(tiny_trace(seed=7))
        b = write_trace(tiny_trace(seed=7))
        assert a == b

    def test_different_seed_differs(self):
        assert write_trace(tiny_trace(seed=7)) != write_trace(tiny_trace(seed=8))

    def test_prefill_weights_normalized_and_causal(self):
        t = tiny_trace(n_prefill=20, s=3, sink_count=2, seed=1)
        h = t.heads_data[0]
        m0 = 18
        for c in range(3):
            row = h.prefill_weights[c]
            support = (20 - 3 + c) - 2 + 1
            assert abs(float(row.sum()) - 1.0) < 1e-5
            assert np.all(row[support:] == 0.0)

    def test_out_of_range_plants_rejected(self):
        with pytest.raises(ValueError):
            tiny_trace(vertical_positions=(0,))  # inside the sink prefix
        with pytest.raises(ValueError):
            tiny_trace(vertical_positions=(500,))
        with pytest.raises(ValueError):
            tiny_trace(slash_offsets=(0,))

    def test_planted_vertical_dominates_topk(self):
        from lfps import KvStore, topk_oracle
        spec = SyntheticSpec(n_prefill=128, steps=16, d=32, s=4, sink_count=2,
                             vertical_positions=(40,), signal_gain=8.0, seed=3,
                             query_correlation=0.0, key_correlation=0.0)
        t = gen_synthetic(spec)
        h = t.heads_data[0]
        keys = h.prefill_keys.astype(np.float64)
        store = KvStore.from_matrices(keys, h.prefill_values.astype(np.float64))
        hits = 0
        for u in range(t.steps):
            got = topk_oracle(h.step_queries[u].astype(np.float64), store, 1,
                              sink_count=2)
            hits += got[0] == 40
            store.append(h.step_keys[u].astype(np.float64),
                         h.step_values[u].astype(np.float64))
        assert hits == t.steps

    def test_no_signal_recovery_near_chance(self):
        from lfps import KvStore, topk_oracle
        spec = SyntheticSpec(n_prefill=256, steps=32, d=16, s=4, sink_count=2,
                             vertical_positions=(40,), signal_gain=0.0, seed=4,
                             query_correlation=0.0, key_correlation=0.0)
        t = gen_synthetic(spec)
        h = t.heads_data[0]
        store = KvStore.from_matrices(h.prefill_keys.astype(np.float64),
                                      h.prefill_values.astype(np.float64))
        hits = 0
        k = 8
        for u in range(t.steps):
            got = topk_oracle(h.step_queries[u].astype(np.float64), store, k,
                              sink_count=2)
            hits += int(40 in got)
            store.append(h.step_keys[u].astype(np.float64),
                         h.step_values[u].astype(np.float64))
        assert hits <= 8  # would be ~32 if the position were planted


class TestValidation:
    def test_bad_magic(self):
        data = bytearray(write_trace(tiny_trace()))
        data[0] ^= 0xFF
        with pytest.raises(BadMagicError):
            read_trace(bytes(data))

    def test_bad_version(self):
        data = bytearray(write_trace(tiny_trace()))
        data[4] = 99
        with pytest.raises(UnsupportedVersionError):
            read_trace(bytes(data))

    def test_truncation(self):
        data = write_trace(tiny_trace())
        with pytest.raises(TruncatedFileError):
            read_trace(data[:-1])
        with pytest.raises(TruncatedFileError):
            read_trace(data + b"\x00")
        with pytest.raises(TruncatedFileError):
            read_trace(data[:10])

    def test_payload_corruption_is_checksum_error(self):
        data = bytearray(write_trace(tiny_trace()))
        data[len(data) // 2] ^= 0x01
        with pytest.raises(ChecksumError):
            read_trace(bytes(data))

    def test_every_single_byte_corruption_rejected(self):
        data = write_trace(tiny_trace(n_prefill=6, steps=1, d=2, s=2, sink_count=1))
        for i in range(len(data)):
            corrupted = bytearray(data)
            corrupted[i] ^= 0xA5
            with pytest.raises(TraceFormatError):
                read_trace(bytes(corrupted))

    def test_inconsistent_header_counts(self):
        t = tiny_trace()
        good = write_trace(t)
        # zero out the head count field (offset 13, u64)
        bad = bytearray(good)
        bad[13:21] = (0).to_bytes(8, "little")
        with pytest.raises(TraceFormatError):
            read_trace(bytes(bad))
