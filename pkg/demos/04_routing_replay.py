"""Route with a trained correctness probe and replay recorded outcomes.

Trains the per-model correctness probe on a noisy synthetic pool, sweeps the
cascade threshold, and compares every routed system against the single-model
baselines and the random-assignment segment — the accuracy/cost trade-off
this toolkit exists to measure.
"""

import numpy as np

from routeforge.data import SplitSpec, split
from routeforge.evaluation import (
    BaselineSegment,
    advantage_matrix,
    baseline_point,
    dominance_report,
    simulate_oracle,
    sweep_cascade,
)
from routeforge.nn import TrainConfig
from routeforge.predictors import correctness_probs, train_correctness
from routeforge.router import pool_by_mean_latency
from routeforge.synth import SynthConfig, synth_pool

data = synth_pool(SynthConfig(
    n_problems=500, dim=16, n_models=4, n_layers=1, best_layer=0,
    embedding_noise=1.0, label_noise=0.02, seed=1234,
))
ids = [p.id for p in data.problems]
train_ids, val_ids, eval_ids = split(ids, SplitSpec(seed=11, counts=(300, 100, 100)))
store = data.stores[0]

pred = train_correctness(
    store, data.outcomes, data.model_ids, train_ids, val_ids,
    TrainConfig(learning_rate=5e-3, batch_size=32, epochs=20, seed=5),
    hidden_dims=(64, 32),
)
print("per-model validation accuracy:",
      {k: round(v, 3) for k, v in pred.val_accuracy.items()})

pool = pool_by_mean_latency(data.outcomes)
x = np.stack([store.vectors[i] for i in eval_ids]).astype(np.float64)
probs_matrix = correctness_probs(pred, x)
order = [pred.model_ids.index(m) for m in pool.model_ids]
probs = {pid: probs_matrix[i, order] for i, pid in enumerate(eval_ids)}

grid = [round(0.1 * k, 10) for k in range(1, 10)]
points, _ = sweep_cascade(probs, grid, pool, eval_ids, data.outcomes)
cheap = baseline_point(pool.cheapest.model_id, eval_ids, data.outcomes)
strong = baseline_point(pool.most_expensive.model_id, eval_ids, data.outcomes)
oracle, _ = simulate_oracle(pool, eval_ids, data.outcomes)

print()
print(f"{'system':<16} {'accuracy':>8} {'latency_s':>10}")
for p in [cheap, strong, oracle] + points:
    print(f"{p.label:<16} {p.accuracy:>8.3f} {p.mean_latency_s:>10.3f}")

print()
print("margin over random assignment at equal latency:")
for row in dominance_report(points, BaselineSegment(cheap, strong)):
    tag = " (extrapolated)" if row.extrapolated else ""
    print(f"  {row.label:<14} margin={row.margin:+.3f}{tag}")

print()
adv = advantage_matrix(data.outcomes)
i, j = adv.model_ids[0], adv.model_ids[-1]
count_ij, count_ji, diff = adv.pair(i, j)
print(f"advantage {i} vs {j}: {count_ij} problems only {i} solves, "
      f"{count_ji} only {j} solves (diff {diff:+d})")
