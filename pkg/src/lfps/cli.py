"""Command-line front end: gen, run, sweep.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from . import bench
from .errors import LfpsError
from .report import emit_csv, emit_json
from .synth import SyntheticSpec, gen_synthetic
from .tracefile import describe, load_trace, save_trace, write_trace


def _int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(x) for x in text.split(","))


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_run_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget", type=float, default=0.02,
                   help="Top-k budget as a fraction of the context (default 0.02)")
    p.add_argument("--a", type=float, default=0.2, help="threshold scale (default 0.2)")
    p.add_argument("--epsilon", type=float, default=0.85,
                   help="sparsity gate threshold (default 0.85)")
    p.add_argument("--r", type=float, default=0.95, help="table decay factor (default 0.95)")
    p.add_argument("--local-window", type=int, default=6,
                   help="always-probed trailing positions (default 6)")
    p.add_argument("--offsets", type=_int_list, default=(-1, 0, 1, 2),
                   help="expansion offsets, comma separated (default -1,0,1,2)")
    p.add_argument("--bypass-mode", choices=("mean_only", "sink_average"),
                   default="sink_average")
    p.add_argument("--exhaustive-fallback", action="store_true",
                   help="force the candidate set to the full non-sink range")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads across heads (env LFPS_THREADS, default 1)")
    p.add_argument("--no-oracle", action="store_true",
                   help="skip oracle scoring; timing-only run")
    p.add_argument("--csv", metavar="PATH", default=None,
                   help="also write per-step records as CSV")


def cmd_gen(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        n_prefill=args.n, steps=args.steps, d=args.d,
        vertical_positions=args.vertical, slash_offsets=args.slash,
        signal_gain=args.signal_gain, noise_scale=args.noise_scale,
        seed=args.seed, layers=args.layers, heads=args.heads, s=args.s,
        sink_count=args.sink_count, query_correlation=args.query_correlation,
        key_correlation=args.key_correlation, plant_jitter=args.jitter,
        sink_gain=args.sink_gain,
    )
    trace = gen_synthetic(spec)
    data = write_trace(trace)
    with open(args.out, "wb") as f:
        f.write(data)
    print(f"wrote {args.out}: {describe(trace)} ({len(data)} bytes)")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    trace = load_trace(args.trace)
    config = bench.config_for_trace(
        trace, r=args.r, epsilon=args.epsilon, a=args.a,
        local_window=args.local_window, expansion_offsets=args.offsets,
        bypass_mode=args.bypass_mode, exhaustive_fallback=args.exhaustive_fallback,
    )
    report = bench.run_trace(
        trace, mode=args.mode, budget=args.budget, config=config,
        threads=args.threads, score_oracle=not args.no_oracle,
        snapshot_tables=args.snapshot_tables, trace_path=args.trace,
    )
    if args.report:
        with open(args.report, "wb") as f:
            f.write(emit_json(report))
    if args.csv:
        with open(args.csv, "wb") as f:
            f.write(emit_csv(report))
    agg = report.aggregates()
    print(f"mode={args.mode} records={agg['records']} "
          f"mean_eta={agg['mean_eta']:.4f} "
          f"candidate_fraction={agg['mean_candidate_fraction']:.4f} "
          f"bypass_rate={agg['bypass_rate']:.4f} "
          f"tokens_per_sec={agg['tokens_per_sec']:.2f}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    grid: dict[str, list[float]] = {}
    for spec in args.grid:
        if "=" not in spec:
            raise LfpsError(f"grid spec {spec!r} must look like param=v1,v2,...")
        name, _, vals = spec.partition("=")
        grid[name.strip()] = _float_list(vals)
    trace = load_trace(args.trace)
    base = bench.config_for_trace(
        trace, r=args.r, epsilon=args.epsilon, a=args.a,
        local_window=args.local_window, expansion_offsets=args.offsets,
        bypass_mode=args.bypass_mode, exhaustive_fallback=args.exhaustive_fallback,
    )
    rows = bench.sweep(trace, grid, mode=args.mode, budget=args.budget,
                       base_config=base, threads=args.threads,
                       score_oracle=not args.no_oracle, trace_path=args.trace)
    names = list(grid)
    header = names + ["mean_eta", "mean_candidate_fraction", "bypass_rate",
                      "tokens_per_sec"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            format(row[c], ".17g") if isinstance(row[c], float) else str(row[c])
            for c in header))
    table = "\n".join(lines)
    print(table)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as f:
            f.write(table + "\n")
    for name, ok in bench.monotonicity_verdicts(grid, rows).items():
        print(f"verdict {name}: {'yes' if ok else 'NO'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lfps",
        description="Sparse-index decoding benchmarks over recorded or synthetic traces")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic trace")
    g.add_argument("--n", type=int, required=True, help="prefill length")
    g.add_argument("--steps", type=int, required=True, help="decode steps")
    g.add_argument("--d", type=int, required=True, help="head dimension")
    g.add_argument("--vertical", type=_int_list, default=(),
                   help="planted vertical positions, comma separated")
    g.add_argument("--slash", type=_int_list, default=(),
                   help="planted slash offsets, comma separated")
    g.add_argument("--signal-gain", type=float, default=2.0)
    g.add_argument("--noise-scale", type=float, default=1.0)
    g.add_argument("--sink-gain", type=float, default=0.0,
                   help="align queries with sink keys (graded per head)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--layers", type=int, default=1)
    g.add_argument("--heads", type=int, default=1)
    g.add_argument("--s", type=int, default=32, help="prefill weight window")
    g.add_argument("--sink-count", type=int, default=4)
    g.add_argument("--query-correlation", type=float, default=0.995)
    g.add_argument("--key-correlation", type=float, default=0.9)
    g.add_argument("--jitter", type=int, default=0,
                   help="per-step jitter radius for planted indices")
    g.add_argument("-o", "--out", required=True, help="output trace path")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a trace and report metrics")
    r.add_argument("trace", help="trace file path")
    r.add_argument("--mode", choices=bench.MODES, default="lfps")
    _add_run_params(r)
    r.add_argument("--report", metavar="PATH", default=None,
                   help="write the full JSON report here")
    r.add_argument("--snapshot-tables", action="store_true",
                   help="include final score tables in the JSON report")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter grid and tabulate aggregates")
    s.add_argument("trace", help="trace file path")
    s.add_argument("--mode", choices=bench.MODES, default="lfps")
    s.add_argument("--grid", action="append", required=True, metavar="PARAM=V1,V2,...",
                   help="swept parameter (a, epsilon, r, budget); repeat for 2-D grids")
    _add_run_params(s)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (LfpsError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
