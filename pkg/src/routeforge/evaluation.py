"""Replay evaluation: policies + recorded outcomes -> (accuracy, latency) points.

Nothing here runs a model. A routed system is scored by looking up, for each
problem, the recorded correctness and latency of the model the policy chose;
cost is the mean of those per-problem latencies, exactly as measured.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .binio import crc32_of_file
from .data import OutcomeMatrix
from .errors import ConfigError, CoverageError, DataError, DimensionError
from .router import (
    ModelPool,
    ModelProfile,
    RoutingDecision,
    route_cascade,
    route_difficulty,
    route_oracle,
    route_random,
)

__all__ = [
    "AdvantageMatrix",
    "BaselineSegment",
    "DominanceRow",
    "ReportBundle",
    "SystemPoint",
    "advantage_matrix",
    "baseline_point",
    "dominance_report",
    "emit_report",
    "load_manifest",
    "monte_carlo_random_point",
    "random_segment",
    "read_points_csv",
    "regenerate_report",
    "simulate",
    "simulate_cascade",
    "simulate_difficulty",
    "simulate_oracle",
    "sweep_cascade",
    "sweep_difficulty",
]


@dataclass
class SystemPoint:
    """(accuracy, mean latency) of one routed or single-model system."""

    label: str
    accuracy: float
    mean_latency_s: float
    n_problems: int
    counts: dict[str, int] = field(default_factory=dict)
    threshold: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise DataError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.mean_latency_s < 0:
            raise DataError(f"negative mean latency {self.mean_latency_s}")
        if self.counts and sum(self.counts.values()) != self.n_problems:
            raise DataError(
                f"routing counts {sum(self.counts.values())} != n_problems {self.n_problems}"
            )
        hits = self.accuracy * self.n_problems
        if abs(hits - round(hits)) > 1e-6:
            raise DataError(f"accuracy {self.accuracy} is not a multiple of 1/{self.n_problems}")


def simulate(
    decide: Callable[[str], RoutingDecision],
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
    pool: ModelPool,
    label: str,
    threshold: Optional[float] = None,
) -> tuple[SystemPoint, list[RoutingDecision]]:
    """Replay a policy: per problem, read the chosen model's recorded outcome."""
    if not eval_ids:
        raise DataError("empty evaluation split")
    outcomes.require_complete(eval_ids, pool.model_ids)
    counts = {m: 0 for m in pool.model_ids}
    decisions = []
    hits = 0
    latency_sum = 0.0
    for pid in eval_ids:
        decision = decide(pid)
        if decision.model_id not in counts:
            raise CoverageError(f"decision chose {decision.model_id!r}, not in pool")
        correct, latency = outcomes.cell(pid, decision.model_id)
        counts[decision.model_id] += 1
        hits += correct
        latency_sum += latency
        decisions.append(decision)
    n = len(eval_ids)
    point = SystemPoint(
        label=label,
        accuracy=hits / n,
        mean_latency_s=latency_sum / n,
        n_problems=n,
        counts=counts,
        threshold=threshold,
    )
    return point, decisions


def simulate_difficulty(
    scores: Mapping[str, float],
    threshold: float,
    small: ModelProfile,
    large: ModelProfile,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
    label: Optional[str] = None,
) -> tuple[SystemPoint, list[RoutingDecision]]:
    pool = ModelPool([small, large])
    missing = [pid for pid in eval_ids if pid not in scores]
    if missing:
        raise CoverageError(f"difficulty scores missing for ids {missing[:10]}")
    return simulate(
        lambda pid: route_difficulty(scores[pid], threshold, small, large, pid),
        eval_ids,
        outcomes,
        pool,
        label if label is not None else f"difficulty@{threshold:g}",
        threshold=threshold,
    )


def simulate_cascade(
    probs: Mapping[str, Sequence[float]],
    threshold: float,
    pool: ModelPool,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
    label: Optional[str] = None,
) -> tuple[SystemPoint, list[RoutingDecision]]:
    missing = [pid for pid in eval_ids if pid not in probs]
    if missing:
        raise CoverageError(f"correctness probabilities missing for ids {missing[:10]}")
    return simulate(
        lambda pid: route_cascade(probs[pid], threshold, pool, pid),
        eval_ids,
        outcomes,
        pool,
        label if label is not None else f"cascade@{threshold:g}",
        threshold=threshold,
    )


def simulate_oracle(
    pool: ModelPool,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
    label: str = "oracle",
) -> tuple[SystemPoint, list[RoutingDecision]]:
    return simulate(
        lambda pid: route_oracle(outcomes.correctness_row(pid, pool.model_ids), pool, pid),
        eval_ids,
        outcomes,
        pool,
        label,
    )


def baseline_point(
    model_id: str,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
    label: Optional[str] = None,
) -> SystemPoint:
    """The always-this-model system."""
    if not eval_ids:
        raise DataError("empty evaluation split")
    outcomes.require_complete(eval_ids, [model_id])
    cells = [outcomes.cell(pid, model_id) for pid in eval_ids]
    n = len(cells)
    return SystemPoint(
        label=label if label is not None else f"baseline:{model_id}",
        accuracy=sum(c for c, _ in cells) / n,
        mean_latency_s=sum(l for _, l in cells) / n,
        n_problems=n,
        counts={model_id: n},
    )


@dataclass
class BaselineSegment:
    """Random assignment between two systems; lam is the probability of point_b."""

    point_a: SystemPoint
    point_b: SystemPoint

    def at(self, lam: float) -> tuple[float, float]:
        """Expected (accuracy, mean latency) at mixing weight lam."""
        if not 0.0 <= lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {lam}")
        acc = (1 - lam) * self.point_a.accuracy + lam * self.point_b.accuracy
        lat = (1 - lam) * self.point_a.mean_latency_s + lam * self.point_b.mean_latency_s
        return acc, lat


def random_segment(
    point_a: SystemPoint,
    point_b: SystemPoint,
    lambda_grid: Sequence[float],
) -> tuple[BaselineSegment, list[tuple[float, float, float]]]:
    """Analytic random-assignment baseline sampled at the given lambdas.

    Returns the segment plus rows of (lambda, accuracy, mean_latency_s).
    """
    segment = BaselineSegment(point_a, point_b)
    rows = []
    for lam in lambda_grid:
        acc, lat = segment.at(float(lam))
        rows.append((float(lam), acc, lat))
    return segment, rows


def monte_carlo_random_point(
    lam: float,
    small_id: str,
    large_id: str,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
    n_draws: int,
    rng: np.random.Generator,
) -> dict[str, float]:
    """Seeded Monte Carlo realization of the random-assignment baseline.

    Each draw routes every problem independently (large with probability
    lam) and replays the outcome; returns mean and std over draws.
    """
    outcomes.require_complete(eval_ids, [small_id, large_id])
    cs = np.array([outcomes.cell(p, small_id)[0] for p in eval_ids], dtype=float)
    cl = np.array([outcomes.cell(p, large_id)[0] for p in eval_ids], dtype=float)
    ls = np.array([outcomes.cell(p, small_id)[1] for p in eval_ids])
    ll = np.array([outcomes.cell(p, large_id)[1] for p in eval_ids])
    take_large = rng.random((n_draws, len(eval_ids))) < lam
    acc = np.where(take_large, cl, cs).mean(axis=1)
    lat = np.where(take_large, ll, ls).mean(axis=1)
    return {
        "accuracy_mean": float(acc.mean()),
        "accuracy_std": float(acc.std(ddof=1)),
        "latency_mean": float(lat.mean()),
        "latency_std": float(lat.std(ddof=1)),
    }


def sweep_difficulty(
    scores: Mapping[str, float],
    thresholds: Sequence[float],
    small: ModelProfile,
    large: ModelProfile,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
) -> tuple[list[SystemPoint], list[list[RoutingDecision]]]:
    """One SystemPoint per threshold; scores are computed once by the caller."""
    if list(thresholds) != sorted(thresholds):
        raise ConfigError("thresholds must be sorted ascending")
    points, decisions = [], []
    for t in thresholds:
        point, dec = simulate_difficulty(scores, float(t), small, large, eval_ids, outcomes)
        points.append(point)
        decisions.append(dec)
    return points, decisions


def sweep_cascade(
    probs: Mapping[str, Sequence[float]],
    thresholds: Sequence[float],
    pool: ModelPool,
    eval_ids: Sequence[str],
    outcomes: OutcomeMatrix,
) -> tuple[list[SystemPoint], list[list[RoutingDecision]]]:
    if list(thresholds) != sorted(thresholds):
        raise ConfigError("thresholds must be sorted ascending")
    points, decisions = [], []
    for t in thresholds:
        point, dec = simulate_cascade(probs, float(t), pool, eval_ids, outcomes)
        points.append(point)
        decisions.append(dec)
    return points, decisions


@dataclass
class DominanceRow:
    label: str
    threshold: Optional[float]
    accuracy: float
    mean_latency_s: float
    segment_accuracy: float
    margin: float
    extrapolated: bool
    below: bool


def dominance_report(
    points: Sequence[SystemPoint], segment: BaselineSegment
) -> list[DominanceRow]:
    """Margin of each point over the segment at equal latency.

    Latencies outside the segment span are compared against the nearest
    endpoint and flagged extrapolated.
    """
    a, b = segment.point_a, segment.point_b
    span = b.mean_latency_s - a.mean_latency_s
    rows = []
    for p in points:
        if span == 0.0:
            lam = 0.0
            extrapolated = p.mean_latency_s != a.mean_latency_s
        else:
            lam = (p.mean_latency_s - a.mean_latency_s) / span
            extrapolated = lam < 0.0 or lam > 1.0
        lam_clamped = min(max(lam, 0.0), 1.0)
        seg_acc, _ = segment.at(lam_clamped)
        margin = p.accuracy - seg_acc
        rows.append(
            DominanceRow(
                label=p.label,
                threshold=p.threshold,
                accuracy=p.accuracy,
                mean_latency_s=p.mean_latency_s,
                segment_accuracy=seg_acc,
                margin=margin,
                extrapolated=extrapolated,
                below=margin < 0,
            )
        )
    return rows


@dataclass
class AdvantageMatrix:
    """counts[i][j] = problems model i solves that model j does not."""

    model_ids: list[str]
    counts: np.ndarray  # int (M, M), zero diagonal
    difference: np.ndarray  # counts - counts.T, antisymmetric

    def pair(self, model_i: str, model_j: str) -> tuple[int, int, int]:
        i = self.model_ids.index(model_i)
        j = self.model_ids.index(model_j)
        return int(self.counts[i, j]), int(self.counts[j, i]), int(self.difference[i, j])


def advantage_matrix(
    outcomes: OutcomeMatrix, model_ids: Optional[Sequence[str]] = None
) -> AdvantageMatrix:
    ids = list(model_ids) if model_ids is not None else list(outcomes.model_ids)
    cols = [outcomes.col(m) for m in ids]
    if not outcomes.mask[:, cols].all():
        holes = int((~outcomes.mask[:, cols]).sum())
        raise CoverageError(f"advantage matrix needs a full mask; {holes} cells missing")
    c = outcomes.correct[:, cols]
    counts = (c.T.astype(np.int64) @ (~c).astype(np.int64))
    return AdvantageMatrix(
        model_ids=ids, counts=counts, difference=counts - counts.T
    )


# ---------------------------------------------------------------------------
# report emission


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ReportBundle:
    """Everything one route-eval run emits, in memory."""

    models: list[str]
    points: list[SystemPoint] = field(default_factory=list)
    segment_rows: list[tuple[float, float, float]] = field(default_factory=list)
    dominance: list[DominanceRow] = field(default_factory=list)
    advantage: Optional[AdvantageMatrix] = None
    decisions: list[RoutingDecision] = field(default_factory=list)


def _write_points_csv(path, points: Sequence[SystemPoint], models: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        count_cols = [f"count_{m}" for m in models]
        f.write(",".join(["label", "threshold", "accuracy", "mean_latency_s", "n"] + count_cols) + "\n")
        for p in points:
            row = [p.label, _fmt(p.threshold), _fmt(p.accuracy), _fmt(p.mean_latency_s), str(p.n_problems)]
            row += [str(p.counts.get(m, 0)) for m in models]
            f.write(",".join(row) + "\n")


def read_points_csv(path) -> list[SystemPoint]:
    points = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        for row in reader:
            counts = {
                k[len("count_") :]: int(v) for k, v in row.items() if k.startswith("count_")
            }
            points.append(
                SystemPoint(
                    label=row["label"],
                    threshold=float(row["threshold"]) if row["threshold"] else None,
                    accuracy=float(row["accuracy"]),
                    mean_latency_s=float(row["mean_latency_s"]),
                    n_problems=int(row["n"]),
                    counts={k: v for k, v in counts.items() if v},
                )
            )
    return points


def _write_segment_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("lambda,accuracy,mean_latency_s\n")
        for lam, acc, lat in rows:
            f.write(f"{_fmt(lam)},{_fmt(acc)},{_fmt(lat)}\n")


def _write_dominance_csv(path, rows: Sequence[DominanceRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(
            "label,threshold,accuracy,mean_latency_s,segment_accuracy,margin,extrapolated,below\n"
        )
        for r in rows:
            f.write(
                ",".join(
                    [
                        r.label,
                        _fmt(r.threshold),
                        _fmt(r.accuracy),
                        _fmt(r.mean_latency_s),
                        _fmt(r.segment_accuracy),
                        _fmt(r.margin),
                        _fmt(r.extrapolated),
                        _fmt(r.below),
                    ]
                )
                + "\n"
            )


def _write_advantage_csv(path, adv: AdvantageMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("model_i,model_j,count_ij,count_ji,diff\n")
        for i, mi in enumerate(adv.model_ids):
            for j, mj in enumerate(adv.model_ids):
                if i < j:
                    f.write(
                        f"{mi},{mj},{int(adv.counts[i, j])},{int(adv.counts[j, i])},"
                        f"{int(adv.difference[i, j])}\n"
                    )


def _write_decisions_csv(path, decisions: Sequence[RoutingDecision]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("problem_id,policy,threshold,chosen_model,score\n")
        for d in decisions:
            f.write(
                f"{d.problem_id},{d.policy},{_fmt(d.threshold)},{d.model_id},{_fmt(d.score)}\n"
            )


def _bundle_to_payload(bundle: ReportBundle) -> dict:
    payload = {
        "models": bundle.models,
        "points": [
            {
                "label": p.label,
                "threshold": p.threshold,
                "accuracy": p.accuracy,
                "mean_latency_s": p.mean_latency_s,
                "n": p.n_problems,
                "counts": p.counts,
            }
            for p in bundle.points
        ],
        "segment": [list(r) for r in bundle.segment_rows],
        "dominance": [
            {
                "label": r.label,
                "threshold": r.threshold,
                "accuracy": r.accuracy,
                "mean_latency_s": r.mean_latency_s,
                "segment_accuracy": r.segment_accuracy,
                "margin": r.margin,
                "extrapolated": r.extrapolated,
                "below": r.below,
            }
            for r in bundle.dominance
        ],
        "decisions": [
            {
                "problem_id": d.problem_id,
                "policy": d.policy,
                "threshold": d.threshold,
                "chosen_model": d.model_id,
                "score": d.score,
            }
            for d in bundle.decisions
        ],
    }
    if bundle.advantage is not None:
        payload["advantage"] = {
            "model_ids": bundle.advantage.model_ids,
            "counts": bundle.advantage.counts.tolist(),
        }
    return payload


def _bundle_from_payload(payload: dict) -> ReportBundle:
    bundle = ReportBundle(models=list(payload["models"]))
    bundle.points = [
        SystemPoint(
            label=p["label"],
            threshold=p["threshold"],
            accuracy=p["accuracy"],
            mean_latency_s=p["mean_latency_s"],
            n_problems=p["n"],
            counts={k: int(v) for k, v in p["counts"].items()},
        )
        for p in payload["points"]
    ]
    bundle.segment_rows = [tuple(r) for r in payload["segment"]]
    bundle.dominance = [DominanceRow(**r) for r in payload["dominance"]]
    bundle.decisions = [
        RoutingDecision(
            problem_id=d["problem_id"],
            model_id=d["chosen_model"],
            policy=d["policy"],
            threshold=d["threshold"],
            score=d["score"],
        )
        for d in payload["decisions"]
    ]
    if "advantage" in payload:
        counts = np.asarray(payload["advantage"]["counts"], dtype=np.int64)
        bundle.advantage = AdvantageMatrix(
            model_ids=list(payload["advantage"]["model_ids"]),
            counts=counts,
            difference=counts - counts.T,
        )
    return bundle


def emit_report(bundle: ReportBundle, out_prefix: str | os.PathLike) -> dict[str, str]:
    """Write the CSV bundle plus a manifest that can regenerate it.

    Returns {artifact name: path}. The manifest carries a CRC32 per emitted
    file and the full payload, so `regenerate_report` can rewrite identical
    CSVs from the manifest alone.
    """
    prefix = os.fspath(out_prefix)
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    written: dict[str, str] = {}

    def emit(name: str, writer, *args) -> None:
        path = prefix + name
        writer(path, *args)
        written[name] = path

    emit("points.csv", _write_points_csv, bundle.points, bundle.models)
    emit("segment.csv", _write_segment_csv, bundle.segment_rows)
    emit("dominance.csv", _write_dominance_csv, bundle.dominance)
    if bundle.advantage is not None:
        emit("advantage.csv", _write_advantage_csv, bundle.advantage)
    emit("decisions.csv", _write_decisions_csv, bundle.decisions)

    manifest = {
        "format": "routeforge-report",
        "version": 1,
        "files": {
            name: {"crc32": crc32_of_file(path)} for name, path in sorted(written.items())
        },
        "data": _bundle_to_payload(bundle),
    }
    manifest_path = prefix + "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    written["manifest.json"] = manifest_path
    return written


def load_manifest(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != "routeforge-report":
        raise DataError(f"{path}: not a routeforge report manifest")
    return manifest


def regenerate_report(manifest_path: str | os.PathLike, out_prefix: str | os.PathLike) -> dict[str, str]:
    """Rewrite the CSV bundle from a manifest's embedded payload."""
    manifest = load_manifest(manifest_path)
    bundle = _bundle_from_payload(manifest["data"])
    return emit_report(bundle, out_prefix)
