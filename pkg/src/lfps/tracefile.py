"""Bit-exact binary trace container for replaying decode workloads.

Layout (all integers unsigned 64-bit little-endian, all vector payloads
32-bit IEEE-754 little-endian, row-major):

  offset  size  field
  0       4     magic "LFPS"
  4       1     version (= 1)
  5       8     layer count L
  13      8     head count H
  21      8     head dimension d
  29      8     prefill length n
  37      8     decode step count T
  45      8     prefill weight window s
  53      8     sink count
  61      8     value encoding (1 = float32)
  69      ...   payload, then:
  -4      4     CRC-32 of the payload bytes (zlib polynomial), u32 LE

Payload, per (layer, head) in layer-major order:
  prefill keys        n x d f32
  prefill values      n x d f32
  prefill weights     s x (n - sink) f32, chronological, each row the
                      step's non-sink softmax weights renormalized to sum 1
                      and zero beyond the step's causal extent
  final prefill query d f32
then, per decode step, per (layer, head):
  query, new key, new value   3 x d f32

The reader validates magic, version, header consistency, total length, and
the checksum before touching the payload, in that order.
"""

from __future__ import annotations

import struct
import sys
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (BadMagicError, ChecksumError, LayoutError,
                     TruncatedFileError, UnsupportedVersionError)

MAGIC = b"LFPS"
VERSION = 1
ENCODING_F32 = 1
_HEADER = struct.Struct("<4sB8Q")
_CRC = struct.Struct("<I")


@dataclass(frozen=True)
class HeadTrace:
    """One head's share of a trace (float32 arrays)."""

    prefill_keys: np.ndarray
    prefill_values: np.ndarray
    prefill_weights: np.ndarray
    final_query: np.ndarray
    step_queries: np.ndarray
    step_keys: np.ndarray
    step_values: np.ndarray


@dataclass(frozen=True)
class TraceFile:
    """An in-memory trace; immutable and safe to share across workers."""

    layers: int
    heads: int
    d: int
    n_prefill: int
    steps: int
    s: int
    sink_count: int
    heads_data: list[HeadTrace]
    value_encoding: int = ENCODING_F32

    @property
    def head_count(self) -> int:
        return self.layers * self.heads


def _f32(a: np.ndarray, shape: tuple[int, ...], what: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float32)
    if a.shape != shape:
        raise ValueError(f"{what} must have shape {shape}, got {a.shape}")
    return a


def write_trace(trace: TraceFile) -> bytes:
    """Serialize a trace to its canonical byte stream."""
    L, H, d = trace.layers, trace.heads, trace.d
    n, T, s, sink = trace.n_prefill, trace.steps, trace.s, trace.sink_count
    if trace.value_encoding != ENCODING_F32:
        raise ValueError(f"unsupported value encoding {trace.value_encoding}")
    if len(trace.heads_data) != L * H:
        raise ValueError(f"expected {L * H} head blocks, got {len(trace.heads_data)}")
    m0 = n - sink
    if m0 < 1:
        raise ValueError("n_prefill must exceed sink_count")

    parts = [_HEADER.pack(MAGIC, VERSION, L, H, d, n, T, s, sink, trace.value_encoding)]
    for i, h in enumerate(trace.heads_data):
        parts.append(_f32(h.prefill_keys, (n, d), f"head {i} prefill keys").tobytes())
        parts.append(_f32(h.prefill_values, (n, d), f"head {i} prefill values").tobytes())
        parts.append(_f32(h.prefill_weights, (s, m0), f"head {i} prefill weights").tobytes())
        parts.append(_f32(h.final_query, (d,), f"head {i} final query").tobytes())
    for t in range(T):
        for i, h in enumerate(trace.heads_data):
            parts.append(_f32(h.step_queries[t], (d,), f"head {i} step {t} query").tobytes())
            parts.append(_f32(h.step_keys[t], (d,), f"head {i} step {t} key").tobytes())
            parts.append(_f32(h.step_values[t], (d,), f"head {i} step {t} value").tobytes())
    payload = b"".join(parts[1:])
    return parts[0] + payload + _CRC.pack(zlib.crc32(payload))


def read_trace(data: bytes) -> TraceFile:
    """Parse and validate a trace byte stream.

    Raises BadMagicError, UnsupportedVersionError, LayoutError,
    TruncatedFileError, or ChecksumError; never returns a partially
    validated trace.
    """
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"stream of {len(data)} bytes is shorter than the header")
    magic, version, L, H, d, n, T, s, sink, enc = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if enc != ENCODING_F32:
        raise LayoutError(f"unknown value encoding {enc}")
    if L < 1 or H < 1 or d < 1 or s < 1 or sink < 1:
        raise LayoutError("layer/head/d/s/sink counts must all be >= 1")
    if n <= sink + s - 1:
        raise LayoutError(f"n_prefill {n} too small for sink_count {sink} and s {s}")
    m0 = n - sink
    per_head_prefill = (2 * n * d + s * m0 + d) * 4
    per_step = L * H * 3 * d * 4
    expected = _HEADER.size + L * H * per_head_prefill + T * per_step + _CRC.size
    if len(data) != expected:
        raise TruncatedFileError(
            f"stream is {len(data)} bytes, header declares {expected}")
    payload = data[_HEADER.size:-_CRC.size]
    (crc_stored,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(payload) != crc_stored:
        raise ChecksumError("payload checksum mismatch")

    def take(off: int, count: int, shape: tuple[int, ...]):
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off)
        return arr.reshape(shape), off + count * 4

    off = _HEADER.size
    blocks: list[dict] = []
    for _ in range(L * H):
        pk, off = take(off, n * d, (n, d))
        pv, off = take(off, n * d, (n, d))
        pw, off = take(off, s * m0, (s, m0))
        fq, off = take(off, d, (d,))
        blocks.append({"pk": pk, "pv": pv, "pw": pw, "fq": fq,
                       "q": [], "k": [], "v": []})
    for _ in range(T):
        for b in blocks:
            q, off = take(off, d, (d,))
            k, off = take(off, d, (d,))
            v, off = take(off, d, (d,))
            b["q"].append(q)
            b["k"].append(k)
            b["v"].append(v)

    def stack(rows: list, count: int) -> np.ndarray:
        if count == 0:
            return np.empty((0, d), dtype=np.float32)
        return np.stack(rows)

    heads_data = [
        HeadTrace(
            prefill_keys=b["pk"], prefill_values=b["pv"], prefill_weights=b["pw"],
            final_query=b["fq"], step_queries=stack(b["q"], T),
            step_keys=stack(b["k"], T), step_values=stack(b["v"], T),
        )
        for b in blocks
    ]
    return TraceFile(layers=L, heads=H, d=d, n_prefill=n, steps=T, s=s,
                     sink_count=sink, heads_data=heads_data, value_encoding=enc)


def save_trace(trace: TraceFile, path) -> None:
    with open(path, "wb") as f:
        f.write(write_trace(trace))


def load_trace(path) -> TraceFile:
    with open(path, "rb") as f:
        return read_trace(f.read())


def describe(trace: TraceFile) -> str:
    return (f"layers={trace.layers} heads={trace.heads} d={trace.d} "
            f"n_prefill={trace.n_prefill} steps={trace.steps} "
            f"s={trace.s} sink_count={trace.sink_count}")


if __name__ == "__main__":  # minimal validator: python -m lfps.tracefile FILE
    if len(sys.argv) != 2:
        print("usage: python -m lfps.tracefile TRACE_FILE", file=sys.stderr)
        raise SystemExit(2)
    try:
        t = load_trace(sys.argv[1])
    except Exception as e:  # noqa: BLE001 - report and signal failure
        print(f"invalid trace: {e}", file=sys.stderr)
        raise SystemExit(1)
    print(f"valid trace: {describe(t)}")
