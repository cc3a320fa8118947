"""Sparse attention indexing over a host-memory KV store.

The pipeline tracks two recurring attention structures across decode steps,
vertical (fixed positions) and slash (fixed relative offsets), in decayed
score tables, and predicts each step's Top-k indices from them: threshold
the tables, widen by neighbor offsets, merge the trailing window, then run
exact dot products only on that candidate set.  Heads whose mass collapses
onto the leading sink tokens skip selection entirely.  Oracles, metrics,
synthetic workloads, a bit-exact trace format, and a benchmark CLI round
out the library.
"""

from .attention import (AttentionOutput, OverlapReport, attention_output,
                        exact_topk_restricted, full_attention_oracle,
                        output_error, overlap_ratio, topk_oracle)
from .candidates import CandidateSet, expand, finalize_probe_set, select_initial
from .config import LfpsConfig
from .engine import (HeadSession, StepResult, decode_step, prefill_bootstrap,
                     run_session)
from .errors import (BadMagicError, ChecksumError, LayoutError, LfpsError,
                     SessionRunError, TraceFormatError, TruncatedFileError,
                     UnsupportedVersionError)
from .gate import (HeadStats, SparsityEstimate, bypass_output,
                   compute_head_stats, estimate_sparsity)
from .numerics import (DotCounter, dot_reference, moments, row_logits,
                       softmax_restricted, softmax_weights)
from .store import KvStore
from .synth import SyntheticSpec, gen_synthetic
from .tables import (ScoreTablePair, ThresholdPair, compute_thresholds,
                     grow_tables, init_tables, update_tables)
from .tracefile import (HeadTrace, TraceFile, load_trace, read_trace,
                        save_trace, write_trace)

__version__ = "0.1.0"

__all__ = [
    "AttentionOutput", "OverlapReport", "attention_output",
    "exact_topk_restricted", "full_attention_oracle", "output_error",
    "overlap_ratio", "topk_oracle",
    "CandidateSet", "expand", "finalize_probe_set", "select_initial",
    "LfpsConfig",
    "HeadSession", "StepResult", "decode_step", "prefill_bootstrap",
    "run_session",
    "BadMagicError", "ChecksumError", "LayoutError", "LfpsError",
    "SessionRunError", "TraceFormatError", "TruncatedFileError",
    "UnsupportedVersionError",
    "HeadStats", "SparsityEstimate", "bypass_output", "compute_head_stats",
    "estimate_sparsity",
    "DotCounter", "dot_reference", "moments", "row_logits",
    "softmax_restricted", "softmax_weights",
    "KvStore",
    "SyntheticSpec", "gen_synthetic",
    "ScoreTablePair", "ThresholdPair", "compute_thresholds", "grow_tables",
    "init_tables", "update_tables",
    "HeadTrace", "TraceFile", "load_trace", "read_trace", "save_trace",
    "write_trace",
    "__version__",
]
