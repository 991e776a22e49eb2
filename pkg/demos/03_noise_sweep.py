"""Sweep the Brownian-noise level and summarize completion times.

Runs the scripted push policy over the noise grid with a batch of seeds
per level, then prints the grouped quartile table (the same aggregation
the stats endpoint serves).
"""
import time

from swarmsim import TaskKind, TaskMode, TrialConfig, aggregate_stats, run_batch

LEVELS = (0.0, 0.5, 1.0, 1.5, 2.0)
SEEDS = 10

configs = [
    TrialConfig(TaskKind.VARY_NOISE, TaskMode(TaskKind.VARY_NOISE, level),
                seed=seed, max_steps=6000, controller_id="scripted_push")
    for level in LEVELS for seed in range(SEEDS)
]

t0 = time.time()
records = run_batch(configs, parallelism=4)
print(f"{len(records)} trials in {time.time() - t0:.0f}s wall time\n")

rows = aggregate_stats(records, "mode")
print(f"{'level':>8} {'n':>3} {'rate':>5} {'q1':>7} {'median':>7} {'q3':>7}")
for row in rows:
    print(f"{row['group']:>8} {row['count']:>3} {row['completion_rate']:>5.2f} "
          f"{row.get('q1', float('nan')):>7.2f} {row.get('median', float('nan')):>7.2f} "
          f"{row.get('q3', float('nan')):>7.2f}")
print("\ndurations are simulated seconds; higher noise should trend slower")
