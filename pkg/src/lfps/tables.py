"""Vertical and slash score tables with decayed updates and O(1) slash shift.

The vertical table accumulates decayed attention weight per absolute
position; the slash table accumulates per diagonal (fixed distance from the
current position) and therefore shifts by one slot every update.  Both are
stored behind a shared lazy decay scale so a step's work is proportional to
the number of selected indices, not the table length:

  actual value(i) = _scale * phys[i]

Decay multiplies _scale; residuals are divided by _scale on the way in.
The slash shift is a base-offset decrement into a physical buffer with
headroom on both sides, so no element moves.  The slot shifted past the top
is the diagonal that belongs to the next appended position; grow() exposes
it instead of zeroing it, which is what keeps the table sum recurrence
  S' = r * S + 1/2
exact across a full update+grow step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import LfpsConfig
from .numerics import moments

_RENORM_FLOOR = 1e-120
_DEGENERATE_S2 = 1e-12


@dataclass(frozen=True)
class ThresholdPair:
    """Selection thresholds and table means for one step.

    A degenerate flag marks a table whose centered spread is numerically
    zero; that pattern contributes nothing to selection for the step.
    """

    tau_ver: float
    tau_sla: float
    mean_ver: float
    mean_sla: float
    ver_degenerate: bool = False
    sla_degenerate: bool = False


class ScoreTablePair:
    """Paired vertical/slash score tables for one head.

    Logical slot i covers absolute position base_index + i; m slots track
    the non-sink positions currently in the KV store.  Single-writer: one
    update()/grow() sequence per decode step.
    """

    __slots__ = (
        "_ver", "_sla", "_sla_base", "_m", "_scale", "_shift_count",
        "_carry_ready", "base_index", "clamp_count", "_scratch",
    )

    def __init__(self, ver: np.ndarray, sla: np.ndarray, base_index: int):
        ver = np.asarray(ver, dtype=np.float64)
        sla = np.asarray(sla, dtype=np.float64)
        if ver.shape != sla.shape or ver.ndim != 1:
            raise ValueError("vertical and slash tables must be 1-D and equal length")
        m = ver.shape[0]
        cap = max(4 * m, m + 64)
        self._ver = np.zeros(cap, dtype=np.float64)
        self._ver[:m] = ver
        self._sla = np.zeros(cap, dtype=np.float64)
        base = (cap - m) // 2
        self._sla[base: base + m] = sla
        self._sla_base = base
        self._m = m
        self._scale = 1.0
        self._shift_count = 0
        self._carry_ready = False
        self.base_index = int(base_index)
        self.clamp_count = 0
        self._scratch = np.empty(cap, dtype=np.float64)

    # -- read side ---------------------------------------------------------

    @property
    def m(self) -> int:
        return self._m

    @property
    def shift(self) -> int:
        """Number of slash shifts performed so far."""
        return self._shift_count

    def ver_values(self) -> np.ndarray:
        """Vertical scores in logical order (fresh array)."""
        return self._ver[: self._m] * self._scale

    def sla_values(self) -> np.ndarray:
        """Slash scores in logical order (fresh array)."""
        b = self._sla_base
        return self._sla[b: b + self._m] * self._scale

    def ver_at(self, i: int) -> float:
        self._check_index(i)
        return float(self._ver[i] * self._scale)

    def sla_at(self, i: int) -> float:
        self._check_index(i)
        return float(self._sla[self._sla_base + i] * self._scale)

    def sums(self) -> tuple[float, float]:
        b = self._sla_base
        return (
            float(self._ver[: self._m].sum() * self._scale),
            float(self._sla[b: b + self._m].sum() * self._scale),
        )

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self._m:
            raise IndexError(f"logical index {i} out of range [0, {self._m})")

    # raw views used by selection; values are phys * scale
    def _phys(self) -> tuple[np.ndarray, np.ndarray, float]:
        b = self._sla_base
        return self._ver[: self._m], self._sla[b: b + self._m], self._scale

    def _phys_moments(self, x: np.ndarray) -> tuple[float, float, float]:
        """(mean, sum c^2, sum c^4) of a phys view, two-pass exact, using a
        reusable scratch buffer to keep the hot loop allocation-free."""
        m = x.shape[0]
        if self._scratch.shape[0] < m:
            self._scratch = np.empty(max(m, 2 * self._scratch.shape[0]),
                                     dtype=np.float64)
        c = self._scratch[:m]
        mean = float(x.mean())
        np.subtract(x, mean, out=c)
        np.multiply(c, c, out=c)
        s2 = float(c.sum())
        s4 = float(np.dot(c, c))
        return mean, s2, s4

    # -- write side ----------------------------------------------------------

    def update(self, selected: np.ndarray, weights: np.ndarray, r: float) -> int:
        """Decay both tables, shift the slash table, and fold in one step's
        attention weights at the selected logical slots.

        weights must be the softmax over exactly the selected set (sum 1).
        Entries driven below zero by the half-uniform subtraction are clamped
        to 0; the number of clamps is returned and accumulated on
        self.clamp_count as a diagnostic.
        """
        selected = np.asarray(selected, dtype=np.int64)
        weights = np.asarray(weights, dtype=np.float64)
        if selected.size == 0:
            raise ValueError("update requires a non-empty selected set")
        if selected.shape != weights.shape:
            raise ValueError("selected and weights must align")
        if selected.min() < 0 or selected.max() >= self._m:
            raise ValueError("selected logical index out of table range")
        total = float(weights.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"selection weights must sum to 1, got {total!r}")

        if self._sla_base == 0:
            self._recenter()
        self._scale *= r
        if self._scale < _RENORM_FLOOR:
            self._renormalize()

        # slash shift: logical i now reads what was logical i-1; the new
        # logical slot 0 starts at zero, the old top parks one past the
        # window for grow() to expose.
        self._sla_base -= 1
        self._sla[self._sla_base] = 0.0
        self._shift_count += 1
        self._carry_ready = True

        k = selected.size
        residual = weights - 1.0 / (2.0 * k)
        add = residual / self._scale
        self._ver[selected] += add
        sla_idx = selected + self._sla_base
        self._sla[sla_idx] += add

        clamps = 0
        ver_sel = self._ver[selected]
        neg = ver_sel < 0.0
        if neg.any():
            clamps += int(neg.sum())
            ver_sel[neg] = 0.0
            self._ver[selected] = ver_sel
        sla_sel = self._sla[sla_idx]
        neg = sla_sel < 0.0
        if neg.any():
            clamps += int(neg.sum())
            sla_sel[neg] = 0.0
            self._sla[sla_idx] = sla_sel
        self.clamp_count += clamps
        return clamps

    def grow(self) -> None:
        """Expose one new logical slot after a KV append.

        The vertical slot starts at zero.  The slash slot receives the
        diagonal parked by the preceding update's shift; if no shift
        happened this step (gated step), it starts at zero too.
        """
        m = self._m
        if m == self._ver.shape[0]:
            self._grow_ver()
        self._ver[m] = 0.0
        top = self._sla_base + m
        if top >= self._sla.shape[0]:
            self._recenter()
            top = self._sla_base + m
        if not self._carry_ready:
            self._sla[top] = 0.0
        self._carry_ready = False
        self._m = m + 1

    # -- buffer management -------------------------------------------------

    def _grow_ver(self) -> None:
        new = np.zeros(self._ver.shape[0] * 2, dtype=np.float64)
        new[: self._m] = self._ver[: self._m]
        self._ver = new

    def _recenter(self) -> None:
        m = self._m
        extent = m + 1  # keep a parked carry slot if present
        cap = max(self._sla.shape[0] * 2, 4 * extent)
        new = np.zeros(cap, dtype=np.float64)
        base = (cap - extent) // 2
        old = self._sla[self._sla_base: self._sla_base + extent]
        new[base: base + old.shape[0]] = old
        self._sla = new
        self._sla_base = base

    def _renormalize(self) -> None:
        self._ver[: self._m] *= self._scale
        b = self._sla_base
        self._sla[b: b + self._m + 1] *= self._scale
        self._scale = 1.0


def init_tables(prefill_weights, config: LfpsConfig) -> ScoreTablePair:
    """Seed the score tables from the trailing prefill attention weights.

    prefill_weights holds config.s weight vectors in chronological order
    (oldest first), each of length m = n - sink_count, renormalized over its
    step's non-sink range and zero beyond the step's causal extent.  The
    vertical table sums each position's weight column; the slash table sums
    along diagonals so that weight at distance delta from its own step lands
    in a single slot.  Both are scaled by 1 / (2 s (1 - r)) so each table
    starts at the decay fixed point sum 1 / (2 (1 - r)).
    """
    w = np.asarray(prefill_weights, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("prefill weights must be a (s, m) matrix")
    s, m = w.shape
    if s != config.s:
        raise ValueError(f"expected {config.s} prefill weight vectors, got {s}")
    if m < 1:
        raise ValueError("prefill weight vectors are empty")
    coeff = 1.0 / (2.0 * s * (1.0 - config.r))
    ver = w.sum(axis=0) * coeff
    sla = np.zeros(m, dtype=np.float64)
    # chronological row c is the (s - c)-th most recent step; its weights
    # shift up by (s - c - 1) slots so every step's own-position weight
    # lands at the top slot of its diagonal
    for c in range(s):
        off = s - c - 1
        if off >= m:
            continue
        if off == 0:
            sla += w[c]
        else:
            sla[off:] += w[c, : m - off]
    sla *= coeff
    return ScoreTablePair(ver, sla, base_index=config.sink_count)


def update_tables(tables: ScoreTablePair, selected_abs, weights, config: LfpsConfig) -> int:
    """Fold one step's selection weights into the tables (absolute indices)."""
    selected_abs = np.asarray(selected_abs, dtype=np.int64)
    return tables.update(selected_abs - tables.base_index, weights, config.r)


def grow_tables(tables: ScoreTablePair, config: LfpsConfig) -> None:
    """Extend the tables by one slot after a KV append."""
    tables.grow()


def compute_thresholds(tables: ScoreTablePair, config: LfpsConfig) -> ThresholdPair:
    """Peakedness-adaptive selection thresholds for the current step.

    For each table, kappa = sum((x - mean)^4) / (sum((x - mean)^2))^2 and
    tau = a * mean / kappa.  Sharper tables (higher kappa) get lower
    thresholds and therefore larger candidate budgets.  A table whose
    centered spread is below 1e-12 is flagged degenerate instead.
    """
    if tables.m < 2:
        raise ValueError("thresholds require at least 2 table slots")
    ver, sla, scale = tables._phys()
    out = []
    for x in (ver, sla):
        mean_p, s2_p, s4_p = tables._phys_moments(x)
        mean = mean_p * scale
        s2 = s2_p * scale * scale
        if s2 < _DEGENERATE_S2:
            out.append((float("nan"), mean, True))
            continue
        kappa = s4_p / (s2_p * s2_p)  # scale-free: the scale cancels
        out.append((config.a * mean / kappa, mean, False))
    (tau_v, mean_v, deg_v), (tau_s, mean_s, deg_s) = out
    return ThresholdPair(tau_v, tau_s, mean_v, mean_s, deg_v, deg_s)


def thresholds_oracle(tables: ScoreTablePair, config: LfpsConfig) -> ThresholdPair:
    """Direct-summation re-derivation of compute_thresholds on materialized
    table values; used by equivalence tests."""
    out = []
    for x in (tables.ver_values(), tables.sla_values()):
        mean, s2, s4 = moments(x)
        if s2 < _DEGENERATE_S2:
            out.append((float("nan"), mean, True))
        else:
            out.append((config.a * mean / (s4 / (s2 * s2)), mean, False))
    (tau_v, mean_v, deg_v), (tau_s, mean_s, deg_s) = out
    return ThresholdPair(tau_v, tau_s, mean_v, mean_s, deg_v, deg_s)
