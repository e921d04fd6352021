"""The two probe types and the per-layer sweep.

A difficulty probe maps one embedding to 5 class logits (levels 1..5) and is
read out as a continuous score, the expectation of the level under the
softmax posterior. A correctness probe maps one embedding to per-model
solve probabilities; by default it is a single shared-trunk network with one
sigmoid head per model (``per_model_heads=True``), with independent
per-model networks available behind the same interface.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .checkpoint import read_checkpoint, write_checkpoint
from .data import EmbeddingStore, OutcomeMatrix, join
from .errors import ConfigError, CoverageError, DataError, DimensionError
from .nn import (
    Batch,
    EpochStats,
    MlpModel,
    TrainConfig,
    derive_seed,
    forward,
    init_mlp,
    sigmoid,
    softmax,
    train,
)

DIFFICULTY_HIDDEN_DIMS = (256, 64)
CORRECTNESS_HIDDEN_DIMS = (8192, 2048, 128)
NUM_DIFFICULTY_CLASSES = 5


@dataclass
class DifficultyPredictor:
    mlp: MlpModel
    embedder_id: str
    layer_index: int
    config: TrainConfig
    history: list[EpochStats]

    def __post_init__(self):
        if self.mlp.output_dim != NUM_DIFFICULTY_CLASSES:
            raise DimensionError(
                f"difficulty predictor must have {NUM_DIFFICULTY_CLASSES} outputs, "
                f"got {self.mlp.output_dim}"
            )


@dataclass
class CorrectnessPredictor:
    networks: list[MlpModel]  # one multi-head net, or one single-head net per model
    model_ids: list[str]
    embedder_id: str
    layer_index: int
    config: TrainConfig
    histories: list[list[EpochStats]]
    per_model_heads: bool = True
    val_accuracy: Optional[dict[str, float]] = None

    def __post_init__(self):
        if len(set(self.model_ids)) != len(self.model_ids):
            raise DataError("model_ids must be unique")
        total_out = sum(net.output_dim for net in self.networks)
        if total_out != len(self.model_ids):
            raise DimensionError(
                f"networks produce {total_out} outputs for {len(self.model_ids)} models"
            )
        if self.per_model_heads and len(self.networks) != 1:
            raise DimensionError("per_model_heads=True expects a single multi-head network")


def _difficulty_targets(
    labels: Mapping[str, int], store: EmbeddingStore, ids: Sequence[str]
) -> Batch:
    x, y, _ = join(store, labels, ids)
    y = y.astype(int)
    if ((y < 1) | (y > 5)).any():
        raise DataError("difficulty labels must be in 1..5")
    return Batch(x=x, y=y - 1)


def train_difficulty(
    store: EmbeddingStore,
    labels: Mapping[str, int],
    train_ids: Sequence[str],
    val_ids: Sequence[str],
    config: TrainConfig,
    hidden_dims: Sequence[int] = DIFFICULTY_HIDDEN_DIMS,
) -> DifficultyPredictor:
    """Train the 5-class difficulty probe on one embedding store."""
    train_batch = _difficulty_targets(labels, store, train_ids)
    val_batch = _difficulty_targets(labels, store, val_ids) if len(val_ids) else None
    dims = (store.dim, *hidden_dims, NUM_DIFFICULTY_CLASSES)
    model = init_mlp(dims, seed=derive_seed(config.seed, 0))
    model, history = train(model, train_batch, val_batch, "cross_entropy", config)
    return DifficultyPredictor(
        mlp=model,
        embedder_id=store.embedder_id,
        layer_index=store.layer_index,
        config=config,
        history=history,
    )


def expected_score(probs: np.ndarray) -> Union[float, np.ndarray]:
    """Expectation of the difficulty level under a class distribution.

    Accepts one distribution (5,) or a batch (n, 5); the result lands in
    [1, 5] by construction.
    """
    p = np.asarray(probs, dtype=np.float64)
    levels = np.arange(1, NUM_DIFFICULTY_CLASSES + 1, dtype=np.float64)
    return p @ levels


@dataclass
class DifficultyScore:
    score: float  # in [1, 5]
    probs: np.ndarray  # softmax posterior over levels 1..5
    level: int  # argmax class, in 1..5


def _embedding_matrix(pred_dim: int, embedding: np.ndarray) -> np.ndarray:
    e = np.asarray(embedding, dtype=np.float64)
    if e.ndim == 1:
        e = e[None, :]
    if e.ndim != 2 or e.shape[1] != pred_dim:
        raise DimensionError(
            f"embedding has shape {np.asarray(embedding).shape}, expected (..., {pred_dim})"
        )
    return e


def difficulty_scores(
    pred: DifficultyPredictor, embeddings: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Batched scoring: returns (scores (n,), probs (n, 5))."""
    x = _embedding_matrix(pred.mlp.input_dim, embeddings)
    logits, _ = forward(pred.mlp, x)
    probs = softmax(logits)
    return expected_score(probs), probs


def predict_difficulty_score(pred: DifficultyPredictor, embedding: np.ndarray) -> DifficultyScore:
    scores, probs = difficulty_scores(pred, embedding)
    return DifficultyScore(
        score=float(scores[0]), probs=probs[0], level=int(np.argmax(probs[0])) + 1
    )


def _correctness_targets(
    outcomes: OutcomeMatrix,
    model_ids: Sequence[str],
    store: EmbeddingStore,
    ids: Sequence[str],
) -> Batch:
    outcomes.require_complete(ids, model_ids)
    labels = {
        pid: outcomes.correctness_row(pid, model_ids).astype(np.float64) for pid in ids
    }
    x, y, _ = join(store, labels, ids)
    return Batch(x=x, y=y)


def train_correctness(
    store: EmbeddingStore,
    outcomes: OutcomeMatrix,
    model_ids: Sequence[str],
    train_ids: Sequence[str],
    val_ids: Sequence[str],
    config: TrainConfig,
    hidden_dims: Sequence[int] = CORRECTNESS_HIDDEN_DIMS,
    per_model_heads: bool = True,
) -> CorrectnessPredictor:
    """Train the per-model correctness probe.

    per_model_heads=True trains one shared-trunk network with M sigmoid
    heads; False trains M independent single-output networks (the other
    reading of the architecture), exposed behind the same predictor type.
    """
    model_ids = list(model_ids)
    if not model_ids:
        raise ConfigError("need at least one target model")
    train_batch = _correctness_targets(outcomes, model_ids, store, train_ids)
    val_batch = (
        _correctness_targets(outcomes, model_ids, store, val_ids) if len(val_ids) else None
    )

    if per_model_heads:
        dims = (store.dim, *hidden_dims, len(model_ids))
        model = init_mlp(dims, seed=derive_seed(config.seed, 0))
        model, history = train(model, train_batch, val_batch, "masked_bce", config)
        networks, histories = [model], [history]
    else:
        networks, histories = [], []
        for j, _ in enumerate(model_ids):
            dims = (store.dim, *hidden_dims, 1)
            net = init_mlp(dims, seed=derive_seed(config.seed, 0, j))
            tb = Batch(x=train_batch.x, y=train_batch.y[:, j : j + 1])
            vb = None if val_batch is None else Batch(x=val_batch.x, y=val_batch.y[:, j : j + 1])
            net, hist = train(net, tb, vb, "masked_bce", config)
            networks.append(net)
            histories.append(hist)

    pred = CorrectnessPredictor(
        networks=networks,
        model_ids=model_ids,
        embedder_id=store.embedder_id,
        layer_index=store.layer_index,
        config=config,
        histories=histories,
        per_model_heads=per_model_heads,
    )
    if val_batch is not None:
        probs = correctness_probs(pred, val_batch.x)
        hits = (probs > 0.5) == (val_batch.y > 0.5)
        pred.val_accuracy = {
            mid: float(hits[:, j].mean()) for j, mid in enumerate(model_ids)
        }
    return pred


def correctness_probs(pred: CorrectnessPredictor, embeddings: np.ndarray) -> np.ndarray:
    """Batched per-model solve probabilities, aligned with pred.model_ids."""
    x = _embedding_matrix(pred.networks[0].input_dim, embeddings)
    columns = []
    for net in pred.networks:
        logits, _ = forward(net, x)
        columns.append(sigmoid(logits))
    return np.concatenate(columns, axis=1)


def predict_correctness(pred: CorrectnessPredictor, embedding: np.ndarray) -> np.ndarray:
    return correctness_probs(pred, embedding)[0]


def evaluate_predictor(
    pred: Union[DifficultyPredictor, CorrectnessPredictor],
    store: EmbeddingStore,
    labels: Union[Mapping[str, int], OutcomeMatrix],
    ids: Sequence[str],
) -> dict[str, float]:
    """Held-out metrics.

    Difficulty: top-1 accuracy and mean absolute error of the expected
    score. Correctness: per-model accuracy at p=0.5 plus their mean.
    """
    if isinstance(pred, DifficultyPredictor):
        if isinstance(labels, OutcomeMatrix):
            raise ConfigError("difficulty predictor needs an id -> level mapping")
        batch = _difficulty_targets(labels, store, ids)
        scores, probs = difficulty_scores(pred, batch.x)
        top1 = np.argmax(probs, axis=1)
        return {
            "accuracy": float(np.mean(top1 == batch.y)),
            "mae": float(np.mean(np.abs(scores - (batch.y + 1)))),
        }
    if not isinstance(labels, OutcomeMatrix):
        raise ConfigError("correctness predictor needs an OutcomeMatrix")
    batch = _correctness_targets(labels, pred.model_ids, store, ids)
    probs = correctness_probs(pred, batch.x)
    hits = (probs > 0.5) == (batch.y > 0.5)
    metrics = {f"accuracy[{mid}]": float(hits[:, j].mean()) for j, mid in enumerate(pred.model_ids)}
    metrics["mean_accuracy"] = float(hits.mean())
    return metrics


@dataclass
class LayerSweepRow:
    layer_index: int
    metrics: dict[str, float]
    final_train_loss: float


@dataclass
class LayerSweepReport:
    rows: list[LayerSweepRow]
    best_layer: int
    primary_metric: str

    def metric_by_layer(self) -> dict[int, float]:
        return {r.layer_index: r.metrics[self.primary_metric] for r in self.rows}


def layer_sweep(
    stores: Sequence[EmbeddingStore],
    labels: Union[Mapping[str, int], OutcomeMatrix],
    train_ids: Sequence[str],
    val_ids: Sequence[str],
    config: TrainConfig,
    task: str = "difficulty",
    hidden_dims: Optional[Sequence[int]] = None,
    model_ids: Optional[Sequence[str]] = None,
) -> LayerSweepReport:
    """Train one probe per layer with an identical config and seed.

    Rows are sorted by layer index; the best layer is the argmax of the
    primary validation metric, ties resolved toward the lower index.
    """
    if not stores:
        raise DataError("no embedding stores supplied")
    if len(val_ids) == 0:
        raise ConfigError("layer sweep needs a validation split")
    embedders = {s.embedder_id for s in stores}
    if len(embedders) > 1:
        raise DataError(f"stores mix embedders: {sorted(embedders)}")
    layer_indices = [s.layer_index for s in stores]
    if len(set(layer_indices)) != len(layer_indices):
        raise DataError(f"duplicate layer indices in stores: {sorted(layer_indices)}")
    id_sets = {frozenset(s.ids) for s in stores}
    if len(id_sets) > 1:
        raise DataError("stores do not cover identical problem ids")
    if task not in ("difficulty", "correctness"):
        raise ConfigError(f"unknown sweep task {task!r}")

    rows = []
    for store in sorted(stores, key=lambda s: s.layer_index):
        if task == "difficulty":
            dims = hidden_dims if hidden_dims is not None else DIFFICULTY_HIDDEN_DIMS
            pred = train_difficulty(store, labels, train_ids, val_ids, config, dims)
            history = pred.history
        else:
            if model_ids is None:
                model_ids = labels.model_ids  # type: ignore[union-attr]
            dims = hidden_dims if hidden_dims is not None else CORRECTNESS_HIDDEN_DIMS
            pred = train_correctness(
                store, labels, model_ids, train_ids, val_ids, config, dims
            )
            history = pred.histories[0]
        metrics = evaluate_predictor(pred, store, labels, val_ids)
        rows.append(
            LayerSweepRow(
                layer_index=store.layer_index,
                metrics=metrics,
                final_train_loss=history[-1].train_loss,
            )
        )

    primary = "accuracy" if task == "difficulty" else "mean_accuracy"
    best_layer, best_value = rows[0].layer_index, rows[0].metrics[primary]
    for row in rows[1:]:
        if row.metrics[primary] > best_value:
            best_layer, best_value = row.layer_index, row.metrics[primary]
    return LayerSweepReport(rows=rows, best_layer=best_layer, primary_metric=primary)


def write_sweep_report(report: LayerSweepReport, path: str | os.PathLike) -> None:
    """CSV with header layer,metric_name,value (one row per layer x metric)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("layer,metric_name,value\n")
        for row in report.rows:
            f.write(f"{row.layer_index},train_loss,{row.final_train_loss!r}\n")
            for name in sorted(row.metrics):
                f.write(f"{row.layer_index},{name},{row.metrics[name]!r}\n")


def _history_to_json(history: list[EpochStats]) -> list[dict]:
    return [dataclasses.asdict(h) for h in history]


def _history_from_json(rows: list[dict]) -> list[EpochStats]:
    return [EpochStats(**row) for row in rows]


def save_predictor(
    pred: Union[DifficultyPredictor, CorrectnessPredictor], prefix: str | os.PathLike
) -> list[str]:
    """Write checkpoint file(s) plus the JSON sidecar; returns written paths."""
    prefix = os.fspath(prefix)
    sidecar_path = prefix + ".json"
    written = [sidecar_path]
    if isinstance(pred, DifficultyPredictor):
        ckpt = prefix + ".rfmlp"
        write_checkpoint(pred.mlp, ckpt)
        written.append(ckpt)
        sidecar = {
            "kind": "difficulty",
            "embedder_id": pred.embedder_id,
            "layer_index": pred.layer_index,
            "config": dataclasses.asdict(pred.config),
            "history": _history_to_json(pred.history),
            "checkpoints": [os.path.basename(ckpt)],
        }
    else:
        checkpoints = []
        if pred.per_model_heads:
            ckpt = prefix + ".rfmlp"
            write_checkpoint(pred.networks[0], ckpt)
            checkpoints.append(os.path.basename(ckpt))
            written.append(ckpt)
        else:
            for j, net in enumerate(pred.networks):
                ckpt = f"{prefix}.m{j}.rfmlp"
                write_checkpoint(net, ckpt)
                checkpoints.append(os.path.basename(ckpt))
                written.append(ckpt)
        sidecar = {
            "kind": "correctness",
            "embedder_id": pred.embedder_id,
            "layer_index": pred.layer_index,
            "model_ids": pred.model_ids,
            "per_model_heads": pred.per_model_heads,
            "val_accuracy": pred.val_accuracy,
            "config": dataclasses.asdict(pred.config),
            "histories": [_history_to_json(h) for h in pred.histories],
            "checkpoints": checkpoints,
        }
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)
        f.write("\n")
    return written


def load_predictor(prefix: str | os.PathLike) -> Union[DifficultyPredictor, CorrectnessPredictor]:
    prefix = os.fspath(prefix)
    with open(prefix + ".json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    base = os.path.dirname(prefix)
    ckpts = [os.path.join(base, name) for name in sidecar["checkpoints"]]
    config = TrainConfig(**sidecar["config"])
    if sidecar["kind"] == "difficulty":
        return DifficultyPredictor(
            mlp=read_checkpoint(ckpts[0]),
            embedder_id=sidecar["embedder_id"],
            layer_index=sidecar["layer_index"],
            config=config,
            history=_history_from_json(sidecar["history"]),
        )
    if sidecar["kind"] == "correctness":
        return CorrectnessPredictor(
            networks=[read_checkpoint(c) for c in ckpts],
            model_ids=list(sidecar["model_ids"]),
            embedder_id=sidecar["embedder_id"],
            layer_index=sidecar["layer_index"],
            config=config,
            histories=[_history_from_json(h) for h in sidecar["histories"]],
            per_model_heads=sidecar["per_model_heads"],
            val_accuracy=sidecar["val_accuracy"],
        )
    raise DataError(f"{prefix}.json: unknown predictor kind {sidecar['kind']!r}")
