"""The binary trace container: roundtrips, validation, corruption.

Writes a trace, reads it back bit-exactly, then demonstrates that the
reader identifies every kind of damage with a distinct error.
"""

from lfps.errors import (BadMagicError, ChecksumError, TruncatedFileError,
                         UnsupportedVersionError)
from lfps.synth import SyntheticSpec, gen_synthetic
from lfps.tracefile import describe, read_trace, write_trace

trace = gen_synthetic(SyntheticSpec(n_prefill=64, steps=4, d=8, s=4,
                                    sink_count=2, seed=1))
data = write_trace(trace)
print(f"wrote {len(data)} bytes: {describe(trace)}")

back = read_trace(data)
print("roundtrip bit-exact:", write_trace(back) == data)

cases = [
    ("flip a magic byte", 0, BadMagicError),
    ("bump the version", 4, UnsupportedVersionError),
    ("flip a payload byte", len(data) // 2, ChecksumError),
    ("flip a checksum byte", len(data) - 1, ChecksumError),
]
for label, pos, expected in cases:
    corrupted = bytearray(data)
    corrupted[pos] ^= 0xFF
    try:
        read_trace(bytes(corrupted))
        print(f"{label}: NOT DETECTED (bug)")
    except expected as e:
        print(f"{label}: {type(e).__name__}: {e}")

try:
    read_trace(data[:-10])
except TruncatedFileError as e:
    print(f"truncate 10 bytes: TruncatedFileError: {e}")
