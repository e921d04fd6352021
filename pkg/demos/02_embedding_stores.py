"""The data layer: embedding stores, outcome matrices, and seeded splits.

Shows the binary *.rfemb round trip, CSV outcome loading with a presence
mask, the shuffle-then-cut split, and joining embeddings with labels into
training matrices.
"""

import tempfile

import numpy as np

from routeforge.data import (
    EmbeddingStore,
    OutcomeRecord,
    OutcomeMatrix,
    SplitSpec,
    join,
    read_embedding_store,
    split,
    write_embedding_store,
)

rng = np.random.default_rng(3)
ids = [f"prob-{i:03d}" for i in range(50)]

print("=" * 60)
print("1. embedding store round trip")
print("=" * 60)
store = EmbeddingStore(
    embedder_id="demo-embedder",
    layer_index=12,
    dim=32,
    vectors={pid: rng.normal(size=32).astype(np.float32) for pid in ids},
)
with tempfile.TemporaryDirectory() as d:
    path = f"{d}/demo.rfemb"
    write_embedding_store(store, path)
    back = read_embedding_store(path)
    same = all(np.array_equal(store.vectors[i], back.vectors[i]) for i in ids)
print(f"{len(back)} records, dim {back.dim}, layer {back.layer_index}, "
      f"payload bit-identical: {same}")

print()
print("=" * 60)
print("2. outcome matrix from records")
print("=" * 60)
records = [
    OutcomeRecord(pid, model, bool(rng.random() < p), float(rng.uniform(0.5, lat)))
    for pid in ids
    for model, p, lat in (("small-1b", 0.55, 2.0), ("big-70b", 0.9, 9.0))
]
outcomes = OutcomeMatrix.from_records(records)
print("per-model accuracy:   ", {k: round(v, 3) for k, v in outcomes.per_model_accuracy().items()})
print("per-model mean latency:", {k: round(v, 2) for k, v in outcomes.per_model_mean_latency().items()})

print()
print("=" * 60)
print("3. deterministic split + join")
print("=" * 60)
train_ids, val_ids, eval_ids = split(ids, SplitSpec(seed=42, counts=(30, 10, 10)))
print(f"split sizes: {len(train_ids)}/{len(val_ids)}/{len(eval_ids)}, "
      f"disjoint: {set(train_ids).isdisjoint(val_ids)}")

labels = {pid: int(outcomes.cell(pid, "big-70b")[0]) for pid in ids}
x, y, kept = join(store, labels, train_ids)
print(f"joined X {x.shape} ({x.dtype}), y balance {y.mean():.2f}")
