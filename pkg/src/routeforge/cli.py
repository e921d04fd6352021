"""Command-line entry point.

Every command resolves its configuration as flags > config file > defaults,
rejects unknown config keys, and writes the resolved config as a JSON
snapshot next to its outputs; rerunning a command from that snapshot alone
reproduces its output files byte for byte.

Exit codes are a stable contract: 0 ok, 2 config error, 3 data error,
4 numeric abort. All randomness flows from the single `seed` key; sub-seeds
are derived with nn.derive_seed(seed, counter) using fixed counters
(100: split shuffling in `synth`, 7: Monte Carlo draws in `route-eval`);
training itself derives init/shuffle streams from its config seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import data as dio
from . import evaluation as ev
from . import predictors as pr
from . import router as rt
from .errors import (
    ConfigError,
    DataError,
    FormatError,
    NumericError,
    RouteforgeError,
    TrainingAbortError,
)
from .nn import TrainConfig, derive_seed
from .synth import SynthConfig, synth_pool

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


# ---------------------------------------------------------------------------
# config plumbing


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if str(v).strip()]


def parse_thresholds(value) -> list[float]:
    """Accept a JSON list, a comma list, or an inclusive "start:stop:step" grid."""
    if isinstance(value, (list, tuple)):
        out = [float(v) for v in value]
    else:
        text = str(value)
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ConfigError(f"threshold grid must be start:stop:step, got {text!r}")
            start, stop, step = (float(p) for p in parts)
            if step <= 0 or stop < start:
                raise ConfigError(f"bad threshold grid {text!r}")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            out = [round(start + k * step, 10) for k in range(n)]
        else:
            out = [float(v) for v in text.split(",") if v.strip()]
    if not out:
        raise ConfigError("empty threshold grid")
    if out != sorted(out):
        raise ConfigError("thresholds must be ascending")
    return out


class Key:
    def __init__(self, name, kind, default=None, required=False, help=""):
        self.name = name
        self.kind = kind  # "str" | "int" | "float" | "bool" | "int_list" | "thresholds"
        self.default = default
        self.required = required
        self.help = help

    def coerce(self, value):
        if value is None:
            return None
        try:
            if self.kind == "int":
                return int(value)
            if self.kind == "float":
                return float(value)
            if self.kind == "bool":
                if isinstance(value, bool):
                    return value
                text = str(value).lower()
                if text in ("1", "true", "yes"):
                    return True
                if text in ("0", "false", "no"):
                    return False
                raise ConfigError(f"key {self.name!r}: bad boolean {value!r}")
            if self.kind == "int_list":
                if isinstance(value, (list, tuple)):
                    return [int(v) for v in value]
                return _parse_int_list(value)
            if self.kind == "thresholds":
                return parse_thresholds(value)
            return str(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"key {self.name!r}: cannot parse {value!r}") from exc


def resolve_config(schema: Sequence[Key], args: argparse.Namespace, command: str) -> dict:
    resolved = {k.name: k.default for k in schema}
    by_name = {k.name: k for k in schema}

    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                file_conf = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {config_path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: malformed JSON: {exc}") from exc
        if not isinstance(file_conf, dict):
            raise ConfigError(f"{config_path}: config must be a JSON object")
        file_command = file_conf.pop("command", None)
        if file_command is not None and file_command != command:
            raise ConfigError(
                f"{config_path}: snapshot is for {file_command!r}, not {command!r}"
            )
        unknown = sorted(set(file_conf) - set(by_name))
        if unknown:
            raise ConfigError(f"{config_path}: unknown config keys {unknown}")
        for name, value in file_conf.items():
            resolved[name] = by_name[name].coerce(value)

    for key in schema:
        flag_value = getattr(args, key.name, None)
        if flag_value is not None:
            resolved[key.name] = key.coerce(flag_value)

    missing = [k.name for k in schema if k.required and resolved[k.name] is None]
    if missing:
        raise ConfigError(f"missing required config keys: {missing}")
    return resolved


def write_snapshot(resolved: dict, command: str, path: str) -> None:
    payload = {"command": command, **resolved}
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def _add_flags(parser: argparse.ArgumentParser, schema: Sequence[Key]) -> None:
    parser.add_argument("--config", help="JSON config file (flags override it)")
    for key in schema:
        flag = "--" + key.name.replace("_", "-")
        parser.add_argument(flag, dest=key.name, default=None, help=key.help)


def _train_config(conf: dict) -> TrainConfig:
    return TrainConfig(
        learning_rate=conf["learning_rate"],
        batch_size=conf["batch_size"],
        epochs=conf["epochs"],
        seed=conf["seed"],
        optimizer=conf["optimizer"],
        checkpoint_policy=conf["checkpoint_policy"],
    )


def _write_history_csv(history, path: str) -> None:
    def fmt(v):
        return "" if v is None else repr(v)

    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("epoch,train_loss,val_loss,val_metric\n")
        for h in history:
            f.write(f"{h.epoch},{fmt(h.train_loss)},{fmt(h.val_loss)},{fmt(h.val_metric)}\n")


def _load_store(path: str) -> dio.EmbeddingStore:
    if not os.path.exists(path):
        raise DataError(f"embedding store not found: {path}")
    return dio.read_embedding_store(path)


def _train_keys(default_lr: float) -> list[Key]:
    return [
        Key("learning_rate", "float", default_lr),
        Key("batch_size", "int", 32),
        Key("epochs", "int", 20),
        Key("seed", "int", 0),
        Key("optimizer", "str", "adam"),
        Key("checkpoint_policy", "str", "best_validation"),
    ]


# ---------------------------------------------------------------------------
# synth

SYNTH_SCHEMA = [
    Key("out", "str", required=True, help="output directory"),
    Key("seed", "int", 0),
    Key("n_problems", "int", 500),
    Key("dim", "int", 16),
    Key("n_models", "int", 4),
    Key("n_layers", "int", 6),
    Key("best_layer", "int", 3),
    Key("embedding_noise", "float", 1.0),
    Key("label_noise", "float", 0.0),
    Key("latency_jitter", "float", 0.25),
    Key("split_train", "float", 0.6),
    Key("split_val", "float", 0.2),
    Key("split_eval", "float", 0.2),
]


def cmd_synth(args) -> int:
    conf = resolve_config(SYNTH_SCHEMA, args, "synth")
    out = conf["out"]
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "layers"), exist_ok=True)
    pool_data = synth_pool(
        SynthConfig(
            n_problems=conf["n_problems"],
            dim=conf["dim"],
            n_models=conf["n_models"],
            n_layers=conf["n_layers"],
            best_layer=conf["best_layer"],
            embedding_noise=conf["embedding_noise"],
            label_noise=conf["label_noise"],
            latency_jitter=conf["latency_jitter"],
            seed=conf["seed"],
        )
    )
    dio.write_problems(pool_data.problems, os.path.join(out, "problems.jsonl"))
    dio.write_outcomes(pool_data.outcomes, os.path.join(out, "outcomes.csv"))
    for store in pool_data.stores:
        dio.write_embedding_store(
            store, os.path.join(out, "layers", f"layer_{store.layer_index:02d}.rfemb")
        )
    pool = rt.pool_by_mean_latency(pool_data.outcomes)
    rt.write_pool(pool, os.path.join(out, "pool.json"))
    ids = [p.id for p in pool_data.problems]
    spec = dio.SplitSpec(
        seed=derive_seed(conf["seed"], 100),
        fractions=(conf["split_train"], conf["split_val"], conf["split_eval"]),
    )
    train_ids, val_ids, eval_ids = dio.split(ids, spec)
    dio.write_split(os.path.join(out, "splits.json"), spec.seed, train_ids, val_ids, eval_ids)
    write_snapshot(conf, "synth", os.path.join(out, "synth.config.json"))
    print(f"synth: {len(ids)} problems, {conf['n_models']} models, "
          f"{conf['n_layers']} layers -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train-difficulty / train-correctness

TRAIN_DIFFICULTY_SCHEMA = [
    Key("store", "str", required=True, help="embedding store (*.rfemb)"),
    Key("problems", "str", required=True, help="problems.jsonl with difficulty labels"),
    Key("splits", "str", required=True, help="splits.json"),
    Key("out_prefix", "str", required=True),
    Key("hidden_dims", "int_list", list(pr.DIFFICULTY_HIDDEN_DIMS)),
    *_train_keys(1e-5),
]


def cmd_train_difficulty(args) -> int:
    conf = resolve_config(TRAIN_DIFFICULTY_SCHEMA, args, "train-difficulty")
    store = _load_store(conf["store"])
    problems = dio.load_problems(conf["problems"])
    labels = {p.id: p.difficulty for p in problems if p.difficulty is not None}
    train_ids, val_ids, _ = dio.read_split(conf["splits"])
    pred = pr.train_difficulty(
        store, labels, train_ids, val_ids, _train_config(conf),
        hidden_dims=tuple(conf["hidden_dims"]),
    )
    prefix = conf["out_prefix"]
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    pr.save_predictor(pred, prefix)
    _write_history_csv(pred.history, prefix + ".history.csv")
    write_snapshot(conf, "train-difficulty", prefix + ".config.json")
    final = pred.history[-1]
    print(f"train-difficulty: {len(train_ids)} train / {len(val_ids)} val; "
          f"final val_metric={final.val_metric}")
    return EXIT_OK


TRAIN_CORRECTNESS_SCHEMA = [
    Key("store", "str", required=True),
    Key("outcomes", "str", required=True, help="outcomes.csv"),
    Key("pool", "str", required=True, help="pool.json naming target models"),
    Key("splits", "str", required=True),
    Key("out_prefix", "str", required=True),
    Key("hidden_dims", "int_list", list(pr.CORRECTNESS_HIDDEN_DIMS)),
    Key("per_model_heads", "bool", True),
    *_train_keys(5e-6),
]


def cmd_train_correctness(args) -> int:
    conf = resolve_config(TRAIN_CORRECTNESS_SCHEMA, args, "train-correctness")
    store = _load_store(conf["store"])
    outcomes = dio.load_outcomes(conf["outcomes"])
    pool = rt.load_pool(conf["pool"])
    train_ids, val_ids, _ = dio.read_split(conf["splits"])
    pred = pr.train_correctness(
        store, outcomes, pool.model_ids, train_ids, val_ids, _train_config(conf),
        hidden_dims=tuple(conf["hidden_dims"]),
        per_model_heads=conf["per_model_heads"],
    )
    prefix = conf["out_prefix"]
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    pr.save_predictor(pred, prefix)
    _write_history_csv(pred.histories[0], prefix + ".history.csv")
    write_snapshot(conf, "train-correctness", prefix + ".config.json")
    print(f"train-correctness: models={pool.model_ids}; val_accuracy={pred.val_accuracy}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep-layers

SWEEP_SCHEMA = [
    Key("stores_dir", "str", required=True, help="directory of per-layer *.rfemb stores"),
    Key("task", "str", "difficulty", help="difficulty | correctness"),
    Key("problems", "str", help="problems.jsonl (difficulty task)"),
    Key("outcomes", "str", help="outcomes.csv (correctness task)"),
    Key("pool", "str", help="pool.json (correctness task)"),
    Key("splits", "str", required=True),
    Key("out_prefix", "str", required=True),
    Key("hidden_dims", "int_list"),
    *_train_keys(1e-5),
]


def cmd_sweep_layers(args) -> int:
    conf = resolve_config(SWEEP_SCHEMA, args, "sweep-layers")
    stores_dir = conf["stores_dir"]
    if not os.path.isdir(stores_dir):
        raise DataError(f"not a directory: {stores_dir}")
    paths = sorted(
        os.path.join(stores_dir, name)
        for name in os.listdir(stores_dir)
        if name.endswith(".rfemb")
    )
    if not paths:
        raise DataError(f"no *.rfemb stores in {stores_dir}")
    stores = [dio.read_embedding_store(p) for p in paths]
    train_ids, val_ids, _ = dio.read_split(conf["splits"])

    if conf["task"] == "difficulty":
        if not conf["problems"]:
            raise ConfigError("difficulty sweep needs the 'problems' key")
        problems = dio.load_problems(conf["problems"])
        labels = {p.id: p.difficulty for p in problems if p.difficulty is not None}
        model_ids = None
    elif conf["task"] == "correctness":
        if not conf["outcomes"] or not conf["pool"]:
            raise ConfigError("correctness sweep needs 'outcomes' and 'pool' keys")
        labels = dio.load_outcomes(conf["outcomes"])
        model_ids = rt.load_pool(conf["pool"]).model_ids
    else:
        raise ConfigError(f"unknown sweep task {conf['task']!r}")

    report = pr.layer_sweep(
        stores, labels, train_ids, val_ids, _train_config(conf),
        task=conf["task"],
        hidden_dims=tuple(conf["hidden_dims"]) if conf["hidden_dims"] else None,
        model_ids=model_ids,
    )
    prefix = conf["out_prefix"]
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    pr.write_sweep_report(report, prefix + ".sweep.csv")
    write_snapshot(conf, "sweep-layers", prefix + ".config.json")
    best = report.metric_by_layer()[report.best_layer]
    print(f"best layer: {report.best_layer} ({report.primary_metric}={best})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# route-eval

ROUTE_EVAL_SCHEMA = [
    Key("policy", "str", required=True, help="difficulty | cascade | oracle"),
    Key("predictor", "str", help="predictor prefix (not needed for oracle)"),
    Key("store", "str", help="embedding store for the eval split"),
    Key("outcomes", "str", required=True),
    Key("pool", "str", required=True),
    Key("splits", "str", required=True),
    Key("thresholds", "thresholds"),
    Key("small", "str", help="difficulty policy: small model id (default cheapest)"),
    Key("large", "str", help="difficulty policy: large model id (default most expensive)"),
    Key("segment_points", "int", 11, help="lambda grid resolution for the baseline segment"),
    Key("mc_draws", "int", 0, help="optional Monte Carlo draws per segment midpoint"),
    Key("seed", "int", 0),
    Key("out_prefix", "str", required=True),
]

DEFAULT_DIFFICULTY_GRID = "2.1:2.9:0.1"
DEFAULT_CASCADE_GRID = "0.05:0.9:0.05"


def _eval_embeddings(store: dio.EmbeddingStore, ids) -> np.ndarray:
    missing = [pid for pid in ids if pid not in store.vectors]
    if missing:
        raise DataError(f"embeddings missing for eval ids {missing[:10]}")
    return np.stack([store.vectors[pid] for pid in ids]).astype(np.float64)


def cmd_route_eval(args) -> int:
    conf = resolve_config(ROUTE_EVAL_SCHEMA, args, "route-eval")
    policy = conf["policy"]
    if policy not in ("difficulty", "cascade", "oracle"):
        raise ConfigError(f"unknown policy {conf['policy']!r}")
    outcomes = dio.load_outcomes(conf["outcomes"])
    pool = rt.load_pool(conf["pool"])
    _, _, eval_ids = dio.read_split(conf["splits"])
    if not eval_ids:
        raise DataError(f"{conf['splits']}: empty eval split")
    outcomes.require_complete(eval_ids, pool.model_ids)

    if conf["thresholds"] is None:
        default = DEFAULT_DIFFICULTY_GRID if policy == "difficulty" else DEFAULT_CASCADE_GRID
        conf["thresholds"] = parse_thresholds(default)

    small = pool.profile(conf["small"]) if conf["small"] else pool.cheapest
    large = pool.profile(conf["large"]) if conf["large"] else pool.most_expensive
    points: list[ev.SystemPoint] = []
    decisions = []

    if policy == "oracle":
        point, dec = ev.simulate_oracle(pool, eval_ids, outcomes)
        points.append(point)
        decisions.extend(dec)
    else:
        if not conf["predictor"] or not conf["store"]:
            raise ConfigError(f"{policy} policy needs 'predictor' and 'store' keys")
        pred = pr.load_predictor(conf["predictor"])
        store = _load_store(conf["store"])
        if (pred.embedder_id, pred.layer_index) != (store.embedder_id, store.layer_index):
            raise DataError(
                f"predictor trained on ({pred.embedder_id}, layer {pred.layer_index}) "
                f"but store is ({store.embedder_id}, layer {store.layer_index})"
            )
        x = _eval_embeddings(store, eval_ids)
        if policy == "difficulty":
            if not isinstance(pred, pr.DifficultyPredictor):
                raise DataError("predictor is not a difficulty predictor")
            scores_arr, _ = pr.difficulty_scores(pred, x)
            scores = dict(zip(eval_ids, (float(s) for s in scores_arr)))
            swept, dec_lists = ev.sweep_difficulty(
                scores, conf["thresholds"], small, large, eval_ids, outcomes
            )
        else:
            if not isinstance(pred, pr.CorrectnessPredictor):
                raise DataError("predictor is not a correctness predictor")
            missing = [m for m in pool.model_ids if m not in pred.model_ids]
            if missing:
                raise DataError(f"predictor lacks heads for pool models {missing}")
            probs_matrix = pr.correctness_probs(pred, x)
            order = [pred.model_ids.index(m) for m in pool.model_ids]
            probs = {
                pid: probs_matrix[i, order] for i, pid in enumerate(eval_ids)
            }
            swept, dec_lists = ev.sweep_cascade(
                probs, conf["thresholds"], pool, eval_ids, outcomes
            )
        points.extend(swept)
        decisions.extend(d for ds in dec_lists for d in ds)

    if policy == "difficulty":
        baseline_ids = [small.model_id, large.model_id]
        seg_a, seg_b = small.model_id, large.model_id
    else:
        baseline_ids = pool.model_ids
        seg_a, seg_b = pool.cheapest.model_id, pool.most_expensive.model_id
    baselines = [ev.baseline_point(m, eval_ids, outcomes) for m in baseline_ids]
    by_id = {b.label.split(":", 1)[1]: b for b in baselines}
    lam_grid = [k / (conf["segment_points"] - 1) for k in range(conf["segment_points"])]
    segment, seg_rows = ev.random_segment(by_id[seg_a], by_id[seg_b], lam_grid)
    dominance = ev.dominance_report(points, segment)
    if conf["mc_draws"] > 0:
        rng = np.random.default_rng(derive_seed(conf["seed"], 7))
        mc = ev.monte_carlo_random_point(
            0.5, seg_a, seg_b, eval_ids, outcomes, conf["mc_draws"], rng
        )
        print(f"monte-carlo λ=0.5: accuracy={mc['accuracy_mean']:.4f}"
              f"±{mc['accuracy_std']:.4f}, latency={mc['latency_mean']:.4f}s")

    bundle = ev.ReportBundle(
        models=pool.model_ids,
        points=points + baselines,
        segment_rows=seg_rows,
        dominance=dominance,
        decisions=decisions,
    )
    written = ev.emit_report(bundle, conf["out_prefix"])
    write_snapshot(conf, "route-eval", conf["out_prefix"] + "config.json")
    best = max(points, key=lambda p: (p.accuracy, -p.mean_latency_s))
    print(f"route-eval[{policy}]: {len(points)} router points; best "
          f"accuracy={best.accuracy:.4f} at {best.mean_latency_s:.4f}s "
          f"({len(written)} files -> {conf['out_prefix']}*)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# advantage / report

ADVANTAGE_SCHEMA = [
    Key("outcomes", "str", required=True),
    Key("out_prefix", "str", required=True),
]


def cmd_advantage(args) -> int:
    conf = resolve_config(ADVANTAGE_SCHEMA, args, "advantage")
    outcomes = dio.load_outcomes(conf["outcomes"])
    adv = ev.advantage_matrix(outcomes)
    prefix = conf["out_prefix"]
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)
    ev._write_advantage_csv(prefix + "advantage.csv", adv)
    write_snapshot(conf, "advantage", prefix + "advantage.config.json")
    print(f"advantage: {len(adv.model_ids)} models -> {prefix}advantage.csv")
    return EXIT_OK


REPORT_SCHEMA = [
    Key("from_manifest", "str", required=True, help="manifest.json of a previous run"),
    Key("out_prefix", "str", required=True),
]


def cmd_report(args) -> int:
    conf = resolve_config(REPORT_SCHEMA, args, "report")
    written = ev.regenerate_report(conf["from_manifest"], conf["out_prefix"])
    write_snapshot(conf, "report", conf["out_prefix"] + "report.config.json")
    print(f"report: regenerated {len(written)} files -> {conf['out_prefix']}*")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routeforge",
        description="Probe-driven routing of reasoning problems across a model pool.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema, func in (
        ("synth", SYNTH_SCHEMA, cmd_synth),
        ("train-difficulty", TRAIN_DIFFICULTY_SCHEMA, cmd_train_difficulty),
        ("train-correctness", TRAIN_CORRECTNESS_SCHEMA, cmd_train_correctness),
        ("sweep-layers", SWEEP_SCHEMA, cmd_sweep_layers),
        ("route-eval", ROUTE_EVAL_SCHEMA, cmd_route_eval),
        ("advantage", ADVANTAGE_SCHEMA, cmd_advantage),
        ("report", REPORT_SCHEMA, cmd_report),
    ):
        p = sub.add_parser(name, help=func.__doc__)
        _add_flags(p, schema)
        p.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingAbortError, NumericError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RouteforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
