"""Synthetic workload generator planting vertical/slash attention structure.

The generator builds traces whose exact Top-k is predictable from history,
which is the regime the pipeline is designed for:

  * planted vertical positions and slash offsets get a directional boost in
    every query, controlled by signal_gain; a small per-step jitter makes
    the patterns intermittent around their nominal index;
  * keys follow a spatially correlated walk, so strong positions come in
    short runs (important indices cluster);
  * queries follow a temporally correlated walk, so the bulk of the exact
    Top-k drifts slowly from step to step instead of reshuffling.

With signal_gain = 0 and both correlations at 0 the trace degenerates to
isotropic noise and no index predictor can beat chance.
Prefill attention weights stored in the trace are the exact softmax weights
of the generated prefill queries, so the bootstrap is self-consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tracefile import HeadTrace, TraceFile


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a generated trace.

    vertical_positions are absolute key indices boosted at every step;
    slash_offsets are relative distances boosted at position t - offset.
    signal_gain is the planted logit lift in scaled-score units: a planted
    position scores ~signal_gain above the noise floor regardless of d or
    noise_scale.  plant_band_width > 0 turns each vertical into a flat
    contiguous band of 2w + 1 positions (planted into the keys through
    mutually orthogonal directions, so every band member gets the same
    lift); real vertical structure is a neighborhood, not a single index.
    plant_jitter draws a per-step offset in [-plant_jitter, plant_jitter]
    for each slash target, and when bands are active it also adds a
    roaming per-step spotlight near each band edge.  sink_gain > 0 aligns
    queries with the sink keys; head h uses sink_gain * (h + 1) / heads so
    a multi-head trace spans a range of sink dominance.
    """

    n_prefill: int
    steps: int
    d: int
    vertical_positions: tuple[int, ...] = ()
    slash_offsets: tuple[int, ...] = ()
    signal_gain: float = 2.0
    noise_scale: float = 1.0
    seed: int = 0
    layers: int = 1
    heads: int = 1
    s: int = 32
    sink_count: int = 4
    query_correlation: float = 0.995
    key_correlation: float = 0.9
    plant_band_width: int = 0
    plant_jitter: int = 0
    sink_gain: float = 0.0

    def __post_init__(self) -> None:
        if self.n_prefill <= self.sink_count + self.s:
            raise ValueError("n_prefill must exceed sink_count + s")
        if self.steps < 0 or self.d < 1 or self.layers < 1 or self.heads < 1:
            raise ValueError("steps, d, layers, heads must be positive")
        if self.s < 1 or self.sink_count < 1:
            raise ValueError("s and sink_count must be >= 1")
        if self.signal_gain < 0 or self.noise_scale <= 0 or self.sink_gain < 0:
            raise ValueError("gains must be non-negative and noise_scale positive")
        if not (0.0 <= self.query_correlation < 1.0 and 0.0 <= self.key_correlation < 1.0):
            raise ValueError("correlations must be in [0, 1)")
        if self.plant_jitter < 0 or self.plant_band_width < 0:
            raise ValueError("plant_jitter and plant_band_width must be >= 0")
        w = self.plant_band_width
        for p in self.vertical_positions:
            if not self.sink_count + w <= p < self.n_prefill - w:
                raise ValueError(
                    f"vertical position {p} (band width {w}) outside "
                    f"[{self.sink_count + w}, {self.n_prefill - w})")
        for o in self.slash_offsets:
            if not 1 <= o < self.n_prefill - self.sink_count - self.s:
                raise ValueError(f"slash offset {o} out of range")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return x / norms


def _correlated_rows(rng: np.random.Generator, count: int, d: int, corr: float) -> np.ndarray:
    """Standard-normal rows following an AR(1) walk with the given
    correlation; unit innovations keep the marginals N(0, 1), so scaled
    dot products q . k / sqrt(d) have unit variance."""
    fresh = rng.standard_normal((count, d))
    if corr > 0.0:
        out = np.empty_like(fresh)
        out[0] = fresh[0]
        blend = math.sqrt(1.0 - corr * corr)
        for i in range(1, count):
            out[i] = corr * out[i - 1] + blend * fresh[i]
        fresh = out
    return fresh


def _gen_head(spec: SyntheticSpec, rng: np.random.Generator, head_index: int) -> HeadTrace:
    n0, steps, d = spec.n_prefill, spec.steps, spec.d
    total = n0 + steps
    sink = spec.sink_count
    scale = math.sqrt(d)

    keys = spec.noise_scale * _correlated_rows(rng, total, d, spec.key_correlation)
    values = rng.standard_normal((total, d))

    band_w = spec.plant_band_width
    band_dirs = None
    if band_w > 0 and spec.vertical_positions and spec.signal_gain > 0.0 \
            and d > len(spec.vertical_positions):
        # one orthogonal unit direction per band: every member key gets the
        # same component, so the planted lift is flat across the band
        raw = rng.standard_normal((d, len(spec.vertical_positions)))
        band_dirs, _ = np.linalg.qr(raw)
        band_dirs = band_dirs.T  # (bands, d)

    # queries exist for the trailing s prefill steps and every decode step
    first_q = n0 - spec.s
    q_base = _correlated_rows(rng, total - first_q, d, spec.query_correlation)

    if band_dirs is not None:
        # keep the noise orthogonal to the planted directions, so the band
        # lift carries no cross-talk with any other position
        keys -= (keys @ band_dirs.T) @ band_dirs
        q_base -= (q_base @ band_dirs.T) @ band_dirs
        amp = math.sqrt(spec.signal_gain * scale)
        for v, u in zip(spec.vertical_positions, band_dirs):
            keys[v - band_w: v + band_w + 1] += amp * u

    key_dirs = _unit_rows(keys)
    key_norms = np.linalg.norm(keys, axis=1)
    key_norms[key_norms == 0.0] = 1.0

    sink_gain = spec.sink_gain * (head_index + 1) / max(spec.heads * spec.layers, 1)

    def point_boost(q, pos, lift):
        # lift the scaled score q . K_pos / sqrt(d) by exactly `lift`
        q += (lift * scale / key_norms[pos]) * key_dirs[pos]

    queries = np.empty((total - first_q, d))
    jit = spec.plant_jitter
    for qi, t in enumerate(range(first_q, total)):
        q = spec.noise_scale * q_base[qi].copy()
        if spec.signal_gain > 0.0:
            if band_dirs is not None:
                amp = math.sqrt(spec.signal_gain * scale)
                for u in band_dirs:
                    q += amp * u
                if jit:
                    # roaming spotlight near each band edge; positions just
                    # outside the band are reachable only through expansion
                    for v in spec.vertical_positions:
                        side = 1 if rng.random() < 0.5 else -1
                        mag = int(rng.integers(band_w - 1, band_w + jit + 1))
                        pj = min(max(v + side * mag, sink), t)
                        point_boost(q, pj, spec.signal_gain)
            else:
                for p in spec.vertical_positions:
                    pj = p + (int(rng.integers(-jit, jit + 1)) if jit else 0)
                    pj = min(max(pj, sink), t)
                    point_boost(q, pj, spec.signal_gain)
            for o in spec.slash_offsets:
                pj = t - o + (int(rng.integers(-jit, jit + 1)) if jit else 0)
                pj = min(max(pj, sink), t)
                point_boost(q, pj, spec.signal_gain)
        if sink_gain > 0.0:
            for j in range(sink):
                point_boost(q, j, sink_gain)
        queries[qi] = q

    # exact prefill attention weights for the trailing s steps, non-sink
    # range renormalized, zero-padded beyond each step's causal extent
    m0 = n0 - sink
    weights = np.zeros((spec.s, m0))
    scale = math.sqrt(d)
    for c in range(spec.s):
        t = n0 - spec.s + c  # query position, attends rows 0..t
        q = queries[t - first_q]
        logits = keys[: t + 1] @ q / scale
        w = np.exp(logits - logits.max())
        w = w[sink:]
        w /= w.sum()
        weights[c, : w.shape[0]] = w

    f32 = np.float32
    return HeadTrace(
        prefill_keys=keys[:n0].astype(f32),
        prefill_values=values[:n0].astype(f32),
        prefill_weights=weights.astype(f32),
        final_query=queries[n0 - 1 - first_q].astype(f32),
        step_queries=queries[n0 - first_q:].astype(f32).reshape(steps, d),
        step_keys=keys[n0:].astype(f32).reshape(steps, d),
        step_values=values[n0:].astype(f32).reshape(steps, d),
    )


def gen_synthetic(spec: SyntheticSpec) -> TraceFile:
    """Generate a deterministic trace for the given spec.

    Heads get independent substreams of the seed, so changing the head
    count does not perturb earlier heads.
    """
    seq = np.random.SeedSequence(spec.seed)
    children = seq.spawn(spec.layers * spec.heads)
    heads_data = [
        _gen_head(spec, np.random.default_rng(children[i]), i)
        for i in range(spec.layers * spec.heads)
    ]
    return TraceFile(
        layers=spec.layers, heads=spec.heads, d=spec.d, n_prefill=spec.n_prefill,
        steps=spec.steps, s=spec.s, sink_count=spec.sink_count,
        heads_data=heads_data,
    )
