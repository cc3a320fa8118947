"""Restricted Top-k, attention outputs, oracles, and metrics."""

import math

import numpy as np
import pytest

from lfps import (KvStore, attention_output, exact_topk_restricted,
                  full_attention_oracle, output_error, overlap_ratio,
                  topk_oracle)


def make_store(rng, n, d):
    return KvStore.from_matrices(rng.standard_normal((n, d)),
                                 rng.standard_normal((n, d)))


class TestExactTopkRestricted:
    def test_undersized_probe(self):
        rng = np.random.default_rng(0)
        store = make_store(rng, 10, 4)
        got = exact_topk_restricted(rng.standard_normal(4), store,
                                    np.array([3], dtype=np.int64), 5)
        np.testing.assert_array_equal(got, [3])

    def test_constructed_maximum_ranks_first(self):
        d = 8
        keys = np.eye(d)
        store = KvStore.from_matrices(keys, keys)
        q = np.zeros(d)
        q[5] = 3.0
        got = exact_topk_restricted(q, store, np.arange(d, dtype=np.int64), 1)
        np.testing.assert_array_equal(got, [5])

    def test_empty_probe_rejected(self):
        rng = np.random.default_rng(1)
        store = make_store(rng, 4, 2)
        with pytest.raises(ValueError):
            exact_topk_restricted(np.ones(2), store, np.array([], dtype=np.int64), 1)

    def test_full_probe_equals_oracle(self):
        rng = np.random.default_rng(2)
        for trial in range(30):
            n = int(rng.integers(8, 256))
            d = int(rng.integers(2, 32))
            store = make_store(rng, n, d)
            if trial % 3 == 0:  # plant exact ties: second half mirrors the first
                store._keys[n // 2: n] = store._keys[: n - n // 2]
            q = rng.standard_normal(d)
            k = int(rng.integers(1, n + 1))
            probe = np.arange(n, dtype=np.int64)
            np.testing.assert_array_equal(
                exact_topk_restricted(q, store, probe, k),
                topk_oracle(q, store, k))

    def test_lower_index_tie_break(self):
        keys = np.tile(np.array([1.0, 0.0]), (6, 1))  # all logits equal
        store = KvStore.from_matrices(keys, keys)
        got = exact_topk_restricted(np.array([1.0, 1.0]), store,
                                    np.arange(6, dtype=np.int64), 3)
        np.testing.assert_array_equal(got, [0, 1, 2])
        np.testing.assert_array_equal(topk_oracle(np.array([1.0, 1.0]), store, 3),
                                      [0, 1, 2])


class TestAttentionOutput:
    def test_single_index_no_sinks(self):
        rng = np.random.default_rng(3)
        store = make_store(rng, 8, 4)
        out = attention_output(rng.standard_normal(4), store,
                               np.array([5], dtype=np.int64), sink_count=0)
        np.testing.assert_allclose(out.output, store.values[5], rtol=1e-12)
        assert out.weights[0] == 1.0

    def test_equal_logits_midpoint(self):
        keys = np.zeros((4, 3))
        values = np.arange(12, dtype=float).reshape(4, 3)
        store = KvStore.from_matrices(keys, values)
        out = attention_output(np.ones(3), store, np.array([1, 3]), sink_count=0)
        np.testing.assert_allclose(out.output, (values[1] + values[3]) / 2, rtol=1e-12)

    def test_full_index_set_matches_full_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(4, 128))
            d = int(rng.integers(2, 16))
            store = make_store(rng, n, d)
            q = rng.standard_normal(d)
            sink = int(rng.integers(0, 3))
            c2 = np.arange(sink, n, dtype=np.int64)
            got = attention_output(q, store, c2, sink_count=sink)
            want = full_attention_oracle(q, store)
            np.testing.assert_allclose(got.output, want.output, rtol=1e-9)

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(5)
        store = make_store(rng, 64, 8)
        out = attention_output(rng.standard_normal(8), store,
                               np.array([10, 20, 30]), sink_count=4)
        assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(out.indices, [0, 1, 2, 3, 10, 20, 30])


class TestFullAttentionOracle:
    def test_single_row(self):
        store = KvStore.from_matrices(np.ones((1, 3)), np.array([[7.0, 8.0, 9.0]]))
        out = full_attention_oracle(np.ones(3), store)
        np.testing.assert_array_equal(out.output, [7.0, 8.0, 9.0])

    def test_uniform_logits_column_mean(self):
        rng = np.random.default_rng(6)
        values = rng.standard_normal((10, 4))
        store = KvStore.from_matrices(np.zeros((10, 4)), values)
        out = full_attention_oracle(rng.standard_normal(4), store)
        np.testing.assert_allclose(out.output, values.mean(axis=0), rtol=1e-12)

    def test_weights_normalized(self):
        rng = np.random.default_rng(7)
        store = make_store(rng, 64, 8)
        out = full_attention_oracle(rng.standard_normal(8), store)
        assert abs(out.weights.sum() - 1.0) < 1e-12


class TestTopkOracle:
    def test_exhaustive_k(self):
        rng = np.random.default_rng(8)
        store = make_store(rng, 20, 4)
        got = topk_oracle(rng.standard_normal(4), store, 16, sink_count=4)
        np.testing.assert_array_equal(got, np.arange(4, 20))

    def test_planted_spike_first(self):
        rng = np.random.default_rng(9)
        keys = rng.standard_normal((50, 8)) * 0.01
        q = rng.standard_normal(8)
        keys[17] = 10.0 * q / np.linalg.norm(q)
        store = KvStore.from_matrices(keys, keys)
        got = topk_oracle(q, store, 1)
        np.testing.assert_array_equal(got, [17])

    def test_matches_full_sort(self):
        rng = np.random.default_rng(10)
        store = make_store(rng, 256, 16)
        q = rng.standard_normal(16)
        scores = store.keys @ q
        want = np.sort(np.argsort(-scores, kind="stable")[:40])
        np.testing.assert_array_equal(topk_oracle(q, store, 40), want)


class TestMetrics:
    def test_overlap_identity_and_disjoint(self):
        a = np.array([1, 2, 3, 4])
        assert overlap_ratio(a, a, 4).eta == 1.0
        assert overlap_ratio(a, np.array([5, 6, 7, 8]), 4).eta == 0.0

    def test_half_overlap(self):
        rep = overlap_ratio(np.array([1, 2, 9, 10]), np.array([1, 2, 3, 4]), 4)
        assert rep.eta == 0.5
        assert rep.intersection == 2

    def test_wrong_exact_size_rejected(self):
        with pytest.raises(ValueError):
            overlap_ratio(np.array([1]), np.array([1, 2]), 4)
        with pytest.raises(ValueError):
            overlap_ratio(np.array([1]), np.array([1]), 0)

    def test_output_error_cases(self):
        x = np.array([1.0, 2.0, 2.0])
        assert output_error(x, x) == 0.0
        assert output_error(2.0 * x, x) == pytest.approx(1.0)
        rng = np.random.default_rng(11)
        a, b = rng.standard_normal(8), rng.standard_normal(8)
        want = math.sqrt(float(((a - b) ** 2).sum())) / math.sqrt(float((b ** 2).sum()))
        assert output_error(a, b) == pytest.approx(want, rel=1e-12)
