"""Threshold scale vs probe cost vs recall.

Sweeps the threshold scale a and the Top-k budget on one trace and
tabulates how the candidate fraction (the share of positions that get
exact dot products) trades against overlap with the exact Top-k.
"""

from lfps.bench import monotonicity_verdicts, sweep
from lfps.synth import SyntheticSpec, gen_synthetic

spec = SyntheticSpec(
    n_prefill=2048, steps=96, d=64,
    vertical_positions=(400, 1000, 1600), slash_offsets=(96, 97),
    signal_gain=5.0, noise_scale=0.5, seed=13,
    plant_band_width=12, plant_jitter=2,
    query_correlation=0.999, key_correlation=0.0,
)
trace = gen_synthetic(spec)

grid = {"a": [0.1, 0.2, 0.3, 0.4]}
rows = sweep(trace, grid, budget=0.02)
print("threshold scale a vs probe cost and recall (budget 2%):")
print("  a     candidate%   mean eta")
for r in rows:
    print(f"  {r['a']:.1f}   {100 * r['mean_candidate_fraction']:8.2f}   "
          f"{r['mean_eta']:.4f}")
for name, ok in monotonicity_verdicts(grid, rows).items():
    print(f"  verdict {name}: {'yes' if ok else 'NO'}")

print("\nbudget vs recall (a = 0.2):")
rows = sweep(trace, {"budget": [0.01, 0.02, 0.05]})
print("  budget   candidate%   mean eta")
for r in rows:
    print(f"  {r['budget']:.2f}   {100 * r['mean_candidate_fraction']:8.2f}   "
          f"{r['mean_eta']:.4f}")
