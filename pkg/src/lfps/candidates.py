"""Candidate index construction: threshold selection, neighbor expansion,
and the always-probed local window."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import LfpsConfig
from .store import KvStore
from .tables import ScoreTablePair, ThresholdPair

_EMPTY = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class CandidateSet:
    """Index sets produced for one decode step (absolute positions).

    c0      initial threshold exceedances
    c1      c0 widened by neighbor offsets, filtered by the table means
    probe   c1 merged with the trailing local window; the set that receives
            exact dot products
    c2      final Top-k chosen inside probe, |c2| = min(budget_k, |probe|)

    c1 is not forced to contain c0: an initial index whose scores sit below
    both table means drops out of the expansion filter.  Such drops are
    counted in c0_dropped rather than silently re-added.
    """

    c0: np.ndarray = field(default_factory=lambda: _EMPTY)
    c1: np.ndarray = field(default_factory=lambda: _EMPTY)
    probe: np.ndarray = field(default_factory=lambda: _EMPTY)
    c2: np.ndarray = field(default_factory=lambda: _EMPTY)
    budget_k: int = 0

    @property
    def c0_dropped(self) -> int:
        if self.c0.size == 0:
            return 0
        return int(self.c0.size - np.isin(self.c0, self.c1).sum())


def select_initial(tables: ScoreTablePair, thresholds: ThresholdPair) -> np.ndarray:
    """Initial candidates: positions whose vertical or slash score strictly
    exceeds its table's threshold.  A degenerate pattern contributes nothing.
    Returns sorted unique absolute indices."""
    ver, sla, scale = tables._phys()
    mask = None
    if not thresholds.ver_degenerate:
        mask = ver > (thresholds.tau_ver / scale)
    if not thresholds.sla_degenerate:
        m2 = sla > (thresholds.tau_sla / scale)
        mask = m2 if mask is None else (mask | m2)
    if mask is None:
        return _EMPTY.copy()
    return np.nonzero(mask)[0].astype(np.int64) + tables.base_index


def expand(c0: np.ndarray, tables: ScoreTablePair, thresholds: ThresholdPair,
           config: LfpsConfig) -> np.ndarray:
    """Widen c0 by the configured offsets, keeping neighbors whose vertical
    or slash score strictly exceeds the corresponding table mean.

    The zero offset passes through the same mean filter, so members of c0
    can drop out here.  Returns sorted unique absolute indices.
    """
    c0 = np.asarray(c0, dtype=np.int64)
    if c0.size == 0:
        return _EMPTY.copy()
    base = tables.base_index
    offsets = np.asarray(config.expansion_offsets, dtype=np.int64)
    cand = (c0[:, None] + offsets[None, :]).ravel()
    logical = cand - base
    in_range = (logical >= 0) & (logical < tables.m)
    logical = np.unique(logical[in_range])
    ver, sla, scale = tables._phys()
    keep = (ver[logical] > thresholds.mean_ver / scale) | (
        sla[logical] > thresholds.mean_sla / scale
    )
    return logical[keep] + base


def finalize_probe_set(c1: np.ndarray, store: KvStore, config: LfpsConfig) -> np.ndarray:
    """Merge the always-probed trailing window into c1.

    Sink positions stay outside the probe set; they are handled exactly by
    the output stage.  Returns sorted unique absolute indices in
    [sink_count, n).
    """
    n = store.n
    if n <= config.sink_count:
        raise ValueError("store holds only sink positions")
    lo = max(config.sink_count, n - config.local_window)
    tail = np.arange(lo, n, dtype=np.int64)
    c1 = np.asarray(c1, dtype=np.int64)
    if c1.size == 0:
        return tail
    return np.union1d(c1, tail)
