"""Run reports: per-step records, aggregates, and canonical JSON/CSV emission.

Reports are schema-versioned.  JSON is emitted in a canonical form (fixed
field order, floats at 17 significant digits) so parse + re-emit is
byte-identical; see docs/report_schema.md.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

_TIMING_KEYS = ("gate", "thresholds", "select", "expand", "finalize",
                "topk", "output", "update", "append", "total")

_CSV_COLUMNS = (
    "layer", "head", "step", "n", "bypassed", "rho", "eta",
    "c0_size", "c1_size", "probe_size", "c2_size", "budget_k",
    "candidate_fraction", "probe_fraction", "output_error",
    "clamp_count", "c0_dropped", "dot_products",
    *(f"{k}_ns" for k in _TIMING_KEYS),
    "oracle_ns",
)


@dataclass
class StepRecord:
    """Metrics for one (layer, head, step)."""

    layer: int
    head: int
    step: int
    n: int
    bypassed: bool
    rho: float
    eta: float | None
    c0_size: int
    c1_size: int
    probe_size: int
    c2_size: int
    budget_k: int
    candidate_fraction: float
    probe_fraction: float
    output_error: float | None
    clamp_count: int
    c0_dropped: int
    dot_products: int
    timings_ns: dict[str, int]
    oracle_ns: int | None = None

    def as_dict(self) -> dict:
        d = {
            "layer": self.layer, "head": self.head, "step": self.step,
            "n": self.n, "bypassed": self.bypassed, "rho": self.rho,
            "eta": self.eta, "c0_size": self.c0_size, "c1_size": self.c1_size,
            "probe_size": self.probe_size, "c2_size": self.c2_size,
            "budget_k": self.budget_k,
            "candidate_fraction": self.candidate_fraction,
            "probe_fraction": self.probe_fraction,
            "output_error": self.output_error,
            "clamp_count": self.clamp_count, "c0_dropped": self.c0_dropped,
            "dot_products": self.dot_products,
            "timings_ns": {k: self.timings_ns.get(k, 0) for k in _TIMING_KEYS},
        }
        d["oracle_ns"] = self.oracle_ns
        return d


@dataclass
class RunReport:
    """Config echo, per-step records, and recomputable aggregates."""

    config: dict
    run: dict
    records: list[StepRecord]
    instrumentation: dict = field(default_factory=dict)
    table_snapshot: dict | None = None

    def aggregates(self) -> dict:
        return compute_aggregates(self.records)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "lfps-run-report",
            "config": self.config,
            "run": self.run,
            "aggregates": self.aggregates(),
            "instrumentation": self.instrumentation,
            "records": [r.as_dict() for r in self.records],
            "table_snapshot": self.table_snapshot,
        }


def compute_aggregates(records: list[StepRecord]) -> dict:
    """Aggregate statistics, all derivable from the record list.

    Throughput figures are single-thread equivalents: tokens_per_sec treats
    one token as every configured head stepping once and divides the step
    count by the summed stage time.
    """
    total = len(records)
    etas = sorted(r.eta for r in records if r.eta is not None)
    fracs = [r.candidate_fraction for r in records if not r.bypassed]
    errs = [r.output_error for r in records if r.output_error is not None]
    bypassed = sum(1 for r in records if r.bypassed)
    lfps_ns = sum(r.timings_ns.get("total", 0) for r in records)
    oracle_ns = sum(r.oracle_ns for r in records if r.oracle_ns is not None)
    oracle_steps = sum(1 for r in records if r.oracle_ns is not None)
    steps = max((r.step for r in records), default=-1) + 1

    def mean(xs):
        return sum(xs) / len(xs) if xs else 0.0

    def median(xs):
        if not xs:
            return 0.0
        mid = len(xs) // 2
        return xs[mid] if len(xs) % 2 else (xs[mid - 1] + xs[mid]) / 2.0

    return {
        "records": total,
        "steps": steps,
        "mean_eta": mean(etas),
        "median_eta": median(etas),
        "mean_candidate_fraction": mean(fracs),
        "bypass_rate": bypassed / total if total else 0.0,
        "mean_output_error": mean(errs),
        "clamp_count": sum(r.clamp_count for r in records),
        "c0_dropped": sum(r.c0_dropped for r in records),
        "dot_products": sum(r.dot_products for r in records),
        "lfps_seconds": lfps_ns / 1e9,
        "steps_per_sec_per_head": total / (lfps_ns / 1e9) if lfps_ns else 0.0,
        "tokens_per_sec": steps / (lfps_ns / 1e9) if lfps_ns else 0.0,
        "reference_seconds": oracle_ns / 1e9,
        "reference_tokens_per_sec": (
            steps * oracle_steps / total / (oracle_ns / 1e9)
            if oracle_ns and total else 0.0),
    }


# -- canonical emission ----------------------------------------------------


def _emit_value(x, out: list[str]) -> None:
    if x is None:
        out.append("null")
    elif x is True:
        out.append("true")
    elif x is False:
        out.append("false")
    elif isinstance(x, int):
        out.append(str(x))
    elif isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} cannot be serialized")
        if x == int(x) and abs(x) < 1e16:
            out.append(f"{x:.1f}")
        else:
            out.append(format(x, ".17g"))
    elif isinstance(x, str):
        out.append(json.dumps(x))
    elif isinstance(x, dict):
        out.append("{")
        for i, (k, v) in enumerate(x.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _emit_value(v, out)
        out.append("}")
    elif isinstance(x, (list, tuple)):
        out.append("[")
        for i, v in enumerate(x):
            if i:
                out.append(",")
            _emit_value(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(x)!r}")


def emit_json(report: RunReport | dict) -> bytes:
    """Canonical JSON bytes: insertion-ordered fields, 17-digit floats."""
    doc = report.as_dict() if isinstance(report, RunReport) else report
    out: list[str] = []
    _emit_value(doc, out)
    out.append("\n")
    return "".join(out).encode("utf-8")


def emit_csv(report: RunReport) -> bytes:
    """Per-step records as CSV, one row per (layer, head, step)."""
    lines = [",".join(_CSV_COLUMNS)]
    for r in report.records:
        row = r.as_dict()
        flat = {**row, **{f"{k}_ns": v for k, v in row["timings_ns"].items()}}
        cells = []
        for col in _CSV_COLUMNS:
            v = flat.get(col)
            if v is None:
                cells.append("")
            elif isinstance(v, bool):
                cells.append("1" if v else "0")
            elif isinstance(v, float):
                cells.append(format(v, ".17g"))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_report(report: RunReport, fmt: str = "json") -> bytes:
    """Serialize a report; fmt is "json" or "csv"."""
    if fmt == "json":
        return emit_json(report)
    if fmt == "csv":
        return emit_csv(report)
    raise ValueError(f"unknown report format {fmt!r}")
