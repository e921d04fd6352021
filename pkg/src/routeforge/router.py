"""Routing policies over a cost-ordered model pool.

All decisions are pure functions of (scores, threshold, pool). "Exceeds a
threshold" is strict ``>`` throughout: a score exactly at the threshold
does not escalate, and a probability exactly at the threshold does not
qualify a model.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import OutcomeMatrix
from .errors import ConfigError, CoverageError, DataError, DimensionError, NumericError

__all__ = [
    "ModelPool",
    "ModelProfile",
    "RoutingDecision",
    "load_pool",
    "pool_by_mean_latency",
    "route_cascade",
    "route_difficulty",
    "route_oracle",
    "route_random",
    "write_pool",
]


@dataclass(frozen=True)
class ModelProfile:
    model_id: str
    cost_rank: int  # 0 = cheapest
    display_name: str = ""


@dataclass
class ModelPool:
    """Candidate models ordered ascending by cost rank."""

    profiles: list[ModelProfile]

    def __post_init__(self):
        if not self.profiles:
            raise ConfigError("model pool must be non-empty")
        ranks = [p.cost_rank for p in self.profiles]
        if len(set(ranks)) != len(ranks):
            raise ConfigError(f"cost ranks must be unique, got {ranks}")
        ids = [p.model_id for p in self.profiles]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate model ids in pool: {ids}")
        self.profiles = sorted(self.profiles, key=lambda p: p.cost_rank)

    def __len__(self) -> int:
        return len(self.profiles)

    @property
    def model_ids(self) -> list[str]:
        return [p.model_id for p in self.profiles]

    @property
    def cheapest(self) -> ModelProfile:
        return self.profiles[0]

    @property
    def most_expensive(self) -> ModelProfile:
        return self.profiles[-1]

    def profile(self, model_id: str) -> ModelProfile:
        for p in self.profiles:
            if p.model_id == model_id:
                return p
        raise CoverageError(f"model {model_id!r} not in pool")


def pool_by_mean_latency(outcomes: OutcomeMatrix, model_ids: Optional[Sequence[str]] = None) -> ModelPool:
    """Default cost ordering: ascending mean measured latency."""
    ids = list(model_ids) if model_ids is not None else list(outcomes.model_ids)
    means = outcomes.per_model_mean_latency()
    missing = [m for m in ids if m not in means]
    if missing:
        raise CoverageError(f"models missing from outcome matrix: {missing}")
    ordered = sorted(ids, key=lambda m: (means[m], m))
    return ModelPool([ModelProfile(m, rank) for rank, m in enumerate(ordered)])


def write_pool(pool: ModelPool, path: str | os.PathLike) -> None:
    payload = [
        {"model_id": p.model_id, "cost_rank": p.cost_rank, "display_name": p.display_name}
        for p in pool.profiles
    ]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def load_pool(path: str | os.PathLike) -> ModelPool:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, list):
        raise DataError(f"{path}: pool config must be a JSON list")
    profiles = []
    for i, entry in enumerate(payload):
        if "model_id" not in entry or "cost_rank" not in entry:
            raise DataError(f"{path}: entry {i} needs model_id and cost_rank")
        profiles.append(
            ModelProfile(
                model_id=str(entry["model_id"]),
                cost_rank=int(entry["cost_rank"]),
                display_name=str(entry.get("display_name", "")),
            )
        )
    return ModelPool(profiles)


@dataclass(frozen=True)
class RoutingDecision:
    problem_id: str
    model_id: str
    policy: str
    threshold: Optional[float]
    score: Optional[float]  # the scalar that drove the choice
    probs: Optional[tuple[float, ...]] = None  # full vector for cascade audits


def route_difficulty(
    score: float,
    threshold: float,
    small: ModelProfile,
    large: ModelProfile,
    problem_id: str = "",
) -> RoutingDecision:
    """Escalate to the large model when the difficulty score exceeds the threshold."""
    if small.cost_rank >= large.cost_rank:
        raise ConfigError(
            f"small model rank {small.cost_rank} must be below large rank {large.cost_rank}"
        )
    if not np.isfinite(score):
        raise NumericError(f"non-finite difficulty score {score!r}")
    chosen = large if score > threshold else small
    return RoutingDecision(
        problem_id=problem_id,
        model_id=chosen.model_id,
        policy="difficulty",
        threshold=float(threshold),
        score=float(score),
    )


def route_cascade(
    probs: Sequence[float],
    threshold: float,
    pool: ModelPool,
    problem_id: str = "",
) -> RoutingDecision:
    """Pick the cheapest model whose predicted correctness exceeds the threshold.

    If no model qualifies, fall back to the most expensive one.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (len(pool),):
        raise DimensionError(
            f"got {p.shape[0] if p.ndim == 1 else p.shape} probabilities for a pool of {len(pool)}"
        )
    if not np.isfinite(p).all():
        raise NumericError("non-finite correctness probabilities")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"cascade threshold must be in [0, 1], got {threshold}")
    chosen, chosen_p = pool.most_expensive, float(p[-1])
    for profile, prob in zip(pool.profiles, p):
        if prob > threshold:
            chosen, chosen_p = profile, float(prob)
            break
    return RoutingDecision(
        problem_id=problem_id,
        model_id=chosen.model_id,
        policy="cascade",
        threshold=float(threshold),
        score=chosen_p,
        probs=tuple(float(v) for v in p),
    )


def route_random(
    lam: float,
    small: ModelProfile,
    large: ModelProfile,
    rng: np.random.Generator,
    problem_id: str = "",
) -> RoutingDecision:
    """Route to the large model with probability lam (seeded)."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must be in [0, 1], got {lam}")
    take_large = rng.random() < lam
    chosen = large if take_large else small
    return RoutingDecision(
        problem_id=problem_id,
        model_id=chosen.model_id,
        policy="random",
        threshold=float(lam),
        score=None,
    )


def route_oracle(
    outcome_row: Sequence[bool],
    pool: ModelPool,
    problem_id: str = "",
) -> RoutingDecision:
    """Hindsight-optimal: the cheapest model recorded correct.

    When every model fails, any choice scores zero, so the cheapest model is
    taken to minimize cost.
    """
    row = np.asarray(outcome_row, dtype=bool)
    if row.shape != (len(pool),):
        raise DimensionError(f"outcome row of {row.shape} for a pool of {len(pool)}")
    chosen = pool.cheapest
    for profile, correct in zip(pool.profiles, row):
        if correct:
            chosen = profile
            break
    return RoutingDecision(
        problem_id=problem_id,
        model_id=chosen.model_id,
        policy="oracle",
        threshold=None,
        score=None,
    )
