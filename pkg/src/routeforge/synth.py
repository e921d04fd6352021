"""Synthetic desk-scale pools with a planted, recoverable structure.

The generator plants three things the rest of the toolkit can be tested
against:

  * difficulty: each problem gets a level in 1..5 and its embedding is a
    class prototype scaled by a per-layer signal strength that peaks at
    ``best_layer`` (strength 1 / (1 + |layer - best_layer|)), plus Gaussian
    noise. A probe swept across layers should recover ``best_layer``.
  * solvability: model j solves exactly the problems with difficulty <=
    ``model_caps[j]``, then each cell is flipped with ``label_noise``.
    Caps are non-decreasing, so stronger models solve supersets.
  * cost: per-problem latency is the model's mean latency times a uniform
    jitter; means increase with model strength.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import EmbeddingStore, OutcomeMatrix, Problem
from .errors import ConfigError

__all__ = ["SynthConfig", "SynthPool", "synth_pool"]


@dataclass
class SynthConfig:
    n_problems: int = 500
    dim: int = 16
    n_models: int = 4
    n_layers: int = 6
    best_layer: int = 3
    embedding_noise: float = 1.0
    label_noise: float = 0.0
    latency_jitter: float = 0.25
    seed: int = 0
    model_caps: Optional[list[int]] = None
    latency_means: Optional[list[float]] = None

    def __post_init__(self):
        if self.n_problems < 1:
            raise ConfigError(f"degenerate config: n_problems={self.n_problems}")
        if self.n_models < 2:
            raise ConfigError(f"need at least 2 models, got {self.n_models}")
        if self.dim < 2:
            raise ConfigError(f"need dim >= 2, got {self.dim}")
        if not (0 <= self.best_layer < self.n_layers):
            raise ConfigError(
                f"best_layer {self.best_layer} outside [0, {self.n_layers})"
            )
        if not 0.0 <= self.label_noise <= 1.0:
            raise ConfigError(f"label_noise must be in [0,1], got {self.label_noise}")
        if self.embedding_noise < 0:
            raise ConfigError(f"embedding_noise must be >= 0, got {self.embedding_noise}")
        if self.model_caps is not None:
            if len(self.model_caps) != self.n_models:
                raise ConfigError("model_caps length must equal n_models")
            if any(b < a for a, b in zip(self.model_caps, self.model_caps[1:])):
                raise ConfigError("model_caps must be non-decreasing")
        if self.latency_means is not None and len(self.latency_means) != self.n_models:
            raise ConfigError("latency_means length must equal n_models")

    def resolved_caps(self) -> list[int]:
        if self.model_caps is not None:
            return list(self.model_caps)
        m = self.n_models
        return [int(round(1 + 4 * (j + 1) / m)) for j in range(m)]

    def resolved_latency_means(self) -> list[float]:
        if self.latency_means is not None:
            return list(self.latency_means)
        return [float(2**j) for j in range(self.n_models)]


@dataclass
class SynthPool:
    problems: list[Problem]
    stores: list[EmbeddingStore]  # one per layer, layer_index = position
    outcomes: OutcomeMatrix
    model_ids: list[str] = field(default_factory=list)

    @property
    def difficulty_labels(self) -> dict[str, int]:
        return {p.id: p.difficulty for p in self.problems}


def signal_strength(layer: int, best_layer: int) -> float:
    """Planted per-layer signal scale; maximal (1.0) at the best layer."""
    return 1.0 / (1.0 + abs(layer - best_layer))


def synth_pool(config: SynthConfig) -> SynthPool:
    """Generate a pool; identical configs give identical pools, bit for bit."""
    rng = np.random.default_rng(config.seed)
    n, dim = config.n_problems, config.dim

    difficulties = rng.integers(1, 6, size=n)
    # One prototype per difficulty level. With dim >= 5 the prototypes are
    # made orthogonal (norm sqrt(dim)), so every class pair is equidistant
    # and pool difficulty depends only on embedding_noise, not on how close
    # two random directions happen to land.
    if dim >= 5:
        basis, _ = np.linalg.qr(rng.normal(size=(dim, 5)))
        prototypes = basis.T * np.sqrt(dim)
    else:
        prototypes = rng.normal(size=(5, dim))

    ids = [f"synth-{i:05d}" for i in range(n)]
    problems = [
        Problem(id=pid, text=f"synthetic problem {i} (level {int(difficulties[i])})",
                source="synth", difficulty=int(difficulties[i]))
        for i, pid in enumerate(ids)
    ]

    stores = []
    for layer in range(config.n_layers):
        s = signal_strength(layer, config.best_layer)
        noise = rng.normal(size=(n, dim)) * config.embedding_noise
        emb = (s * prototypes[difficulties - 1] + noise).astype(np.float32)
        stores.append(
            EmbeddingStore(
                embedder_id="synth",
                layer_index=layer,
                dim=dim,
                vectors={pid: emb[i] for i, pid in enumerate(ids)},
            )
        )

    caps = np.asarray(config.resolved_caps())
    correct = difficulties[:, None] <= caps[None, :]
    if config.label_noise > 0:
        flips = rng.random((n, config.n_models)) < config.label_noise
        correct = correct ^ flips

    means = np.asarray(config.resolved_latency_means())
    jitter = 1.0 + config.latency_jitter * (2.0 * rng.random((n, config.n_models)) - 1.0)
    latency = means[None, :] * jitter

    model_ids = [f"m{j}" for j in range(config.n_models)]
    outcomes = OutcomeMatrix(
        problem_ids=ids,
        model_ids=model_ids,
        correct=correct,
        latency=latency,
        mask=np.ones((n, config.n_models), dtype=bool),
    )
    return SynthPool(problems=problems, stores=stores, outcomes=outcomes, model_ids=model_ids)
