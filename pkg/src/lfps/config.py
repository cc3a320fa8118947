"""Run configuration shared by the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

_TIE_BREAK_RULES = ("lower_index",)
_BYPASS_MODES = ("mean_only", "sink_average")


@dataclass(frozen=True)
class LfpsConfig:
    """Per-head pipeline parameters.

    d               head dimension
    s               number of trailing prefill steps used to seed the score tables
    r               decay factor applied to the score tables each step, in [0, 1)
    epsilon         sparsity gate threshold in (0, 1]; heads with higher estimated
                    sink share skip selection entirely
    a               scale applied to the peakedness-adaptive selection threshold
    expansion_offsets  signed neighbor offsets applied when widening the initial
                    candidate set; must contain 0
    sink_count      leading positions pinned as attention sinks, handled exactly
    local_window    trailing positions always probed
    tie_break       rule applied when scores compare equal ("lower_index")
    bypass_mode     output used for gated heads: "mean_only" returns the mean
                    value vector, "sink_average" blends sink values with it
    exhaustive_fallback  force thresholds and means to -inf so the candidate set
                    becomes the full non-sink range (oracle-equivalence mode)
    """

    d: int
    s: int = 32
    r: float = 0.95
    epsilon: float = 0.85
    a: float = 0.2
    expansion_offsets: tuple[int, ...] = (-1, 0, 1, 2)
    sink_count: int = 4
    local_window: int = 6
    tie_break: str = "lower_index"
    bypass_mode: str = "sink_average"
    exhaustive_fallback: bool = field(default=False)

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if not 0.0 <= self.r < 1.0:
            raise ValueError(f"r must be in [0, 1), got {self.r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if not self.a > 0.0:
            raise ValueError(f"a must be > 0, got {self.a}")
        if self.sink_count < 1:
            raise ValueError(f"sink_count must be >= 1, got {self.sink_count}")
        if self.local_window < 1:
            raise ValueError(f"local_window must be >= 1, got {self.local_window}")
        offsets = tuple(int(o) for o in self.expansion_offsets)
        if 0 not in offsets:
            raise ValueError("expansion_offsets must contain 0")
        object.__setattr__(self, "expansion_offsets", offsets)
        if self.tie_break not in _TIE_BREAK_RULES:
            raise ValueError(f"unknown tie_break rule {self.tie_break!r}")
        if self.bypass_mode not in _BYPASS_MODES:
            raise ValueError(f"unknown bypass_mode {self.bypass_mode!r}")

    def as_dict(self) -> dict:
        """Plain-dict form used for report echoing."""
        return {
            "d": self.d,
            "s": self.s,
            "r": self.r,
            "epsilon": self.epsilon,
            "a": self.a,
            "expansion_offsets": list(self.expansion_offsets),
            "sink_count": self.sink_count,
            "local_window": self.local_window,
            "tie_break": self.tie_break,
            "bypass_mode": self.bypass_mode,
            "exhaustive_fallback": self.exhaustive_fallback,
        }
