"""Data model and file I/O.

Formats owned here (all little-endian, human-auditable where text):
  problems.jsonl  one JSON object per line: id, text, source, difficulty?
  outcomes.csv    header problem_id,model_id,correct,latency_s
  *.rfemb         binary embedding store, magic "RFEMB1", CRC32 trailer
  splits.json     record of a materialized split: seed + id lists
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .binio import PayloadReader, PayloadWriter
from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    DimensionError,
    NumericError,
    VersionError,
    ZeroDimError,
)

EMBEDDING_MAGIC = b"RFEMB1"
EMBEDDING_FORMAT_VERSION = 1

DIFFICULTY_LEVELS = (1, 2, 3, 4, 5)


@dataclass
class Problem:
    id: str
    text: str
    source: str = ""
    difficulty: Optional[int] = None

    def __post_init__(self):
        if not self.id:
            raise DataError("problem id must be non-empty")
        if self.difficulty is not None and self.difficulty not in DIFFICULTY_LEVELS:
            raise DataError(
                f"problem {self.id!r}: difficulty {self.difficulty} outside {DIFFICULTY_LEVELS}"
            )


def load_problems(path: str | os.PathLike) -> list[Problem]:
    """Parse a JSONL problem file; every error names its line number."""
    problems: list[Problem] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise DataError(f"{path}:{lineno}: object must carry 'id' and 'text'")
            difficulty = obj.get("difficulty")
            if difficulty is not None and (
                not isinstance(difficulty, int) or difficulty not in DIFFICULTY_LEVELS
            ):
                raise DataError(
                    f"{path}:{lineno}: difficulty {difficulty!r} outside 1..5"
                )
            pid = str(obj["id"])
            if pid in seen:
                raise DataError(f"{path}:{lineno}: duplicate problem id {pid!r}")
            seen.add(pid)
            problems.append(
                Problem(
                    id=pid,
                    text=str(obj["text"]),
                    source=str(obj.get("source", "")),
                    difficulty=difficulty,
                )
            )
    return problems


def write_problems(problems: Iterable[Problem], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in problems:
            rec = {"id": p.id, "text": p.text, "source": p.source}
            if p.difficulty is not None:
                rec["difficulty"] = p.difficulty
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def difficulty_histogram(problems: Sequence[Problem]) -> dict[int, int]:
    hist = {level: 0 for level in DIFFICULTY_LEVELS}
    for p in problems:
        if p.difficulty is not None:
            hist[p.difficulty] += 1
    return hist


@dataclass
class OutcomeRecord:
    problem_id: str
    model_id: str
    correct: bool
    latency_s: float

    def __post_init__(self):
        if self.latency_s < 0:
            raise DataError(
                f"({self.problem_id}, {self.model_id}): negative latency {self.latency_s}"
            )


@dataclass
class OutcomeMatrix:
    """Dense problems x models grids of correctness and latency plus a presence mask."""

    problem_ids: list[str]
    model_ids: list[str]
    correct: np.ndarray  # bool (P, M)
    latency: np.ndarray  # float64 (P, M)
    mask: np.ndarray  # bool (P, M)

    def __post_init__(self):
        shape = (len(self.problem_ids), len(self.model_ids))
        for name in ("correct", "latency", "mask"):
            if getattr(self, name).shape != shape:
                raise DimensionError(f"{name} grid shape != {shape}")
        self._prow = {pid: i for i, pid in enumerate(self.problem_ids)}
        self._mcol = {mid: j for j, mid in enumerate(self.model_ids)}
        if len(self._prow) != len(self.problem_ids):
            raise DataError("duplicate problem ids")
        if len(self._mcol) != len(self.model_ids):
            raise DataError("duplicate model ids")

    @classmethod
    def from_records(cls, records: Iterable[OutcomeRecord]) -> "OutcomeMatrix":
        """Build with first-seen problem/model ordering; duplicates rejected."""
        prow: dict[str, int] = {}
        mcol: dict[str, int] = {}
        cells: dict[tuple[int, int], tuple[bool, float]] = {}
        for rec in records:
            i = prow.setdefault(rec.problem_id, len(prow))
            j = mcol.setdefault(rec.model_id, len(mcol))
            if (i, j) in cells:
                raise DataError(
                    f"duplicate outcome for ({rec.problem_id}, {rec.model_id})"
                )
            cells[(i, j)] = (rec.correct, rec.latency_s)
        correct = np.zeros((len(prow), len(mcol)), dtype=bool)
        latency = np.zeros((len(prow), len(mcol)), dtype=np.float64)
        mask = np.zeros((len(prow), len(mcol)), dtype=bool)
        for (i, j), (c, lat) in cells.items():
            correct[i, j] = c
            latency[i, j] = lat
            mask[i, j] = True
        return cls(list(prow), list(mcol), correct, latency, mask)

    def row(self, problem_id: str) -> int:
        try:
            return self._prow[problem_id]
        except KeyError:
            raise CoverageError(f"problem {problem_id!r} not in outcome matrix") from None

    def col(self, model_id: str) -> int:
        try:
            return self._mcol[model_id]
        except KeyError:
            raise CoverageError(f"model {model_id!r} not in outcome matrix") from None

    def cell(self, problem_id: str, model_id: str) -> tuple[bool, float]:
        i, j = self.row(problem_id), self.col(model_id)
        if not self.mask[i, j]:
            raise CoverageError(f"no outcome recorded for ({problem_id}, {model_id})")
        return bool(self.correct[i, j]), float(self.latency[i, j])

    def correctness_row(self, problem_id: str, model_ids: Sequence[str]) -> np.ndarray:
        i = self.row(problem_id)
        cols = [self.col(m) for m in model_ids]
        if not self.mask[i, cols].all():
            missing = [m for m, j in zip(model_ids, cols) if not self.mask[i, j]]
            raise CoverageError(f"problem {problem_id!r}: no outcome for models {missing}")
        return self.correct[i, cols]

    def per_model_accuracy(self) -> dict[str, float]:
        out = {}
        for mid, j in self._mcol.items():
            m = self.mask[:, j]
            out[mid] = float(self.correct[m, j].mean()) if m.any() else float("nan")
        return out

    def per_model_mean_latency(self) -> dict[str, float]:
        out = {}
        for mid, j in self._mcol.items():
            m = self.mask[:, j]
            out[mid] = float(self.latency[m, j].mean()) if m.any() else float("nan")
        return out

    def require_complete(
        self, problem_ids: Sequence[str], model_ids: Sequence[str], limit: int = 10
    ) -> None:
        """Raise CoverageError naming (up to limit) missing cells."""
        missing: list[str] = []
        cols = []
        for m in model_ids:
            if m not in self._mcol:
                missing.append(f"model:{m}")
            else:
                cols.append(self._mcol[m])
        for pid in problem_ids:
            if len(missing) >= limit:
                break
            if pid not in self._prow:
                missing.append(f"problem:{pid}")
                continue
            i = self._prow[pid]
            for j in cols:
                if not self.mask[i, j]:
                    missing.append(f"cell:({pid},{self.model_ids[j]})")
        if missing:
            raise CoverageError(
                f"outcome matrix incomplete; first missing entries: {missing[:limit]}"
            )


def load_outcomes(path: str | os.PathLike, strict: bool = False) -> OutcomeMatrix:
    """Parse an outcomes CSV. strict=True additionally requires a full mask."""
    records: list[OutcomeRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != [
            "problem_id",
            "model_id",
            "correct",
            "latency_s",
        ]:
            raise DataError(
                f"{path}: expected header problem_id,model_id,correct,latency_s, got {header}"
            )
        for lineno, rowvals in enumerate(reader, start=2):
            if not rowvals:
                continue
            if len(rowvals) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(rowvals)}")
            pid, mid, correct_s, latency_s = (v.strip() for v in rowvals)
            low = correct_s.lower()
            if low in ("1", "true"):
                correct = True
            elif low in ("0", "false"):
                correct = False
            else:
                raise DataError(f"{path}:{lineno}: non-boolean correct value {correct_s!r}")
            try:
                latency = float(latency_s)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad latency {latency_s!r}") from exc
            if not np.isfinite(latency) or latency < 0:
                raise DataError(f"{path}:{lineno}: negative or non-finite latency {latency_s}")
            records.append(OutcomeRecord(pid, mid, correct, latency))
    try:
        matrix = OutcomeMatrix.from_records(records)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if strict and not matrix.mask.all():
        holes = int((~matrix.mask).sum())
        raise DataError(f"{path}: {holes} missing (problem, model) cells in strict mode")
    return matrix


def write_outcomes(matrix: OutcomeMatrix, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["problem_id", "model_id", "correct", "latency_s"])
        for i, pid in enumerate(matrix.problem_ids):
            for j, mid in enumerate(matrix.model_ids):
                if matrix.mask[i, j]:
                    writer.writerow(
                        [pid, mid, int(matrix.correct[i, j]), repr(float(matrix.latency[i, j]))]
                    )


@dataclass
class EmbeddingStore:
    """Fixed-dimension f32 vectors for one (embedder, layer) pair, keyed by problem id."""

    embedder_id: str
    layer_index: int
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.layer_index < 0:
            raise DataError(f"layer_index must be >= 0, got {self.layer_index}")
        if self.dim < 1:
            raise ZeroDimError(f"embedding dim must be >= 1, got {self.dim}")
        for pid, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DimensionError(
                    f"embedding for {pid!r} has shape {vec.shape}, expected ({self.dim},)"
                )
            if vec.dtype != np.float32:
                raise DimensionError(f"embedding for {pid!r} must be float32")
            if not np.isfinite(vec).all():
                raise NumericError(f"embedding for {pid!r} contains non-finite values")

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def ids(self) -> list[str]:
        return list(self.vectors)

    def vector(self, problem_id: str) -> np.ndarray:
        try:
            return self.vectors[problem_id]
        except KeyError:
            raise CoverageError(
                f"no embedding for problem {problem_id!r} "
                f"(embedder {self.embedder_id!r}, layer {self.layer_index})"
            ) from None


def write_embedding_store(store: EmbeddingStore, path: str | os.PathLike) -> None:
    if store.dim < 1:
        raise ZeroDimError(f"refusing to write store with dim {store.dim}")
    with open(path, "wb") as f:
        w = PayloadWriter(f, EMBEDDING_MAGIC)
        w.u16(EMBEDDING_FORMAT_VERSION)
        w.string(store.embedder_id)
        w.u32(store.layer_index)
        w.u32(store.dim)
        w.u32(len(store.vectors))
        for pid, vec in store.vectors.items():
            w.string(pid)
            w.array(vec)
        w.finish()


def read_embedding_store(path: str | os.PathLike) -> EmbeddingStore:
    with open(path, "rb") as f:
        data = f.read()
    r = PayloadReader(data, EMBEDDING_MAGIC, source=str(path))
    version = r.u16()
    if version != EMBEDDING_FORMAT_VERSION:
        raise VersionError(
            f"{path}: store version {version}, reader supports {EMBEDDING_FORMAT_VERSION}"
        )
    embedder_id = r.string()
    layer_index = r.u32()
    dim = r.u32()
    count = r.u32()
    raw: list[tuple[str, np.ndarray]] = []
    for _ in range(count):
        pid = r.string()
        raw.append((pid, r.array(dim, "<f4")))
    r.expect_end()
    r.verify_crc()
    if dim == 0:
        raise ZeroDimError(f"{path}: store declares dim 0")
    vectors: dict[str, np.ndarray] = {}
    for pid, vec in raw:
        if pid in vectors:
            raise DataError(f"{path}: duplicate problem id {pid!r}")
        vectors[pid] = vec
    return EmbeddingStore(
        embedder_id=embedder_id, layer_index=layer_index, dim=dim, vectors=vectors
    )


@dataclass
class SplitSpec:
    """Shuffle-then-cut split sizes, as exact counts or fractions of the population."""

    seed: int
    counts: Optional[tuple[int, int, int]] = None
    fractions: Optional[tuple[float, float, float]] = None

    def __post_init__(self):
        if (self.counts is None) == (self.fractions is None):
            raise ConfigError("give exactly one of counts or fractions")
        if self.counts is not None:
            if len(self.counts) != 3 or any(c < 0 for c in self.counts):
                raise ConfigError(f"counts must be 3 non-negative ints, got {self.counts}")
        else:
            if len(self.fractions) != 3 or any(x < 0 for x in self.fractions):
                raise ConfigError(f"fractions must be 3 non-negative floats, got {self.fractions}")
            if sum(self.fractions) > 1.0 + 1e-9:
                raise ConfigError(f"fractions sum to {sum(self.fractions)} > 1")

    def resolve_counts(self, n: int) -> tuple[int, int, int]:
        if self.counts is not None:
            if sum(self.counts) > n:
                raise ConfigError(f"split counts {self.counts} exceed population {n}")
            return self.counts
        counts = tuple(int(np.floor(f * n)) for f in self.fractions)
        return counts  # floor guarantees sum <= n


def split(
    ids: Sequence[str],
    spec: SplitSpec,
    stratify_by: Optional[Mapping[str, str]] = None,
) -> tuple[list[str], list[str], list[str]]:
    """Partition ids into (train, val, eval) by seeded shuffle-then-cut.

    With stratify_by (id -> group label), each group is shuffled and cut so
    group proportions match the requested sizes (largest-remainder rounding);
    totals stay exact.
    """
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise DataError("ids to split must be unique")
    n_train, n_val, n_eval = spec.resolve_counts(len(ids))
    rng = np.random.default_rng(spec.seed)

    if stratify_by is None:
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        train = shuffled[:n_train]
        val = shuffled[n_train : n_train + n_val]
        ev = shuffled[n_train + n_val : n_train + n_val + n_eval]
        return train, val, ev

    missing = [i for i in ids if i not in stratify_by]
    if missing:
        raise CoverageError(f"stratify labels missing for ids {missing[:10]}")
    groups: dict[str, list[str]] = {}
    for i in ids:
        groups.setdefault(stratify_by[i], []).append(i)
    # shuffle within each group (stable group order: first appearance)
    for members in groups.values():
        perm = rng.permutation(len(members))
        members[:] = [members[k] for k in perm]

    def allocate(total: int) -> dict[str, int]:
        if total == 0:
            return {g: 0 for g in groups}
        quotas = {g: total * len(m) / len(ids) for g, m in groups.items()}
        alloc = {g: int(np.floor(q)) for g, q in quotas.items()}
        leftover = total - sum(alloc.values())
        by_remainder = sorted(groups, key=lambda g: (alloc[g] - quotas[g], g))
        for g in by_remainder[:leftover]:
            alloc[g] += 1
        return alloc

    out: tuple[list[str], list[str], list[str]] = ([], [], [])
    cursors = {g: 0 for g in groups}
    for part, total in zip(out, (n_train, n_val, n_eval)):
        alloc = allocate(total)
        # largest-remainder can over-ask a small group in a later part; spill
        # the shortfall to groups that still have members
        shortfall = 0
        for g, take in alloc.items():
            available = len(groups[g]) - cursors[g]
            use = min(take, available)
            part.extend(groups[g][cursors[g] : cursors[g] + use])
            cursors[g] += use
            shortfall += take - use
        if shortfall:
            for g in groups:
                while shortfall and cursors[g] < len(groups[g]):
                    part.append(groups[g][cursors[g]])
                    cursors[g] += 1
                    shortfall -= 1
    return out


def write_split(
    path: str | os.PathLike,
    seed: int,
    train: Sequence[str],
    val: Sequence[str],
    eval_ids: Sequence[str],
) -> None:
    payload = {
        "seed": seed,
        "train": list(train),
        "val": list(val),
        "eval": list(eval_ids),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def read_split(path: str | os.PathLike) -> tuple[list[str], list[str], list[str]]:
    with open(path, "r", encoding="utf-8") as f:
        obj = json.load(f)
    for key in ("train", "val", "eval"):
        if key not in obj:
            raise DataError(f"{path}: split file missing key {key!r}")
    return list(obj["train"]), list(obj["val"]), list(obj["eval"])


def join(
    store: EmbeddingStore,
    labels: Mapping[str, object],
    ids: Sequence[str],
    strict: bool = True,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Align embeddings and targets over ids.

    Returns (X, y, kept_ids): X is float64 (len(kept), dim) — f32 payloads are
    promoted — and y stacks the label values in the same order. strict=False
    silently drops ids missing from either side (kept_ids says what survived).
    """
    kept: list[str] = []
    for pid in ids:
        in_store = pid in store.vectors
        in_labels = pid in labels
        if in_store and in_labels:
            kept.append(pid)
        elif strict:
            side = "embedding store" if not in_store else "labels"
            raise CoverageError(f"id {pid!r} missing from {side}")
    x = np.zeros((len(kept), store.dim), dtype=np.float64)
    for k, pid in enumerate(kept):
        x[k] = store.vectors[pid].astype(np.float64)
    y = np.asarray([labels[pid] for pid in kept])
    return x, y, kept
