"""Acceptance suite.

Each test implements one acceptance criterion at its stated tolerance and
prints one [PASS]/[FAIL] line (run with `pytest tests/test_acceptance.py -v -s`
to see them as they complete).
"""

import functools
import itertools
import json
import os
import time

import numpy as np
import pytest

from routeforge.checkpoint import read_checkpoint, write_checkpoint
from routeforge.cli import main
from routeforge.data import SplitSpec, read_embedding_store, split
from routeforge.evaluation import (
    BaselineSegment,
    advantage_matrix,
    baseline_point,
    dominance_report,
    read_points_csv,
    simulate_cascade,
    simulate_difficulty,
    simulate_oracle,
    sweep_cascade,
    sweep_difficulty,
)
from routeforge.nn import Batch, TrainConfig, grad_check, init_mlp
from routeforge.predictors import (
    CORRECTNESS_HIDDEN_DIMS,
    DIFFICULTY_HIDDEN_DIMS,
    load_predictor,
    train_correctness,
    train_difficulty,
)
from routeforge.router import ModelPool, ModelProfile, route_cascade, route_oracle
from routeforge.synth import SynthConfig, synth_pool
from routeforge.data import OutcomeMatrix


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[FAIL] {name}")
                raise
            print(f"\n[PASS] {name} ({time.perf_counter() - start:.1f}s)")
            return result

        return wrapper

    return decorate


def run_cli(*argv):
    return main([str(a) for a in argv])


def tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            path = os.path.join(dirpath, name)
            with open(path, "rb") as f:
                out[os.path.relpath(path, root)] = f.read()
    return out


# ---------------------------------------------------------------------------


@criterion("gradient correctness: analytic vs central differences < 1e-4, 20 MLPs, < 30 s")
def test_gradient_correctness():
    start = time.perf_counter()
    worst = 0.0
    # truncated forms of the two probe architectures; 20 models total
    for seed in range(15):
        rng = np.random.default_rng(1000 + seed)
        model = init_mlp([64, 32, 16, 5], seed=seed)
        batch = Batch(x=rng.normal(size=(4, 64)), y=rng.integers(0, 5, size=4))
        worst = max(worst, grad_check(model, "cross_entropy", batch, epsilon=1e-5))
    for seed in range(5):
        rng = np.random.default_rng(2000 + seed)
        model = init_mlp([64, 128, 64, 16, 8], seed=100 + seed)
        targets = (rng.random((4, 8)) < 0.5).astype(float)
        mask = (rng.random((4, 8)) < 0.85).astype(float)
        mask[0, 0] = 1.0
        batch = Batch(x=rng.normal(size=(4, 64)), y=targets, mask=mask)
        worst = max(worst, grad_check(model, "masked_bce", batch, epsilon=1e-5))
    elapsed = time.perf_counter() - start
    assert worst < 1e-4, f"worst relative error {worst}"
    assert elapsed < 30.0, f"took {elapsed:.1f}s"


@criterion("exact-split fidelity: (6000,1500) of 7500 and (1882,626,628) of 3136, < 1 s")
def test_exact_split_fidelity():
    start = time.perf_counter()
    ids = [f"math-{i}" for i in range(7500)]
    train_ids, val_ids, eval_ids = split(ids, SplitSpec(seed=9, counts=(6000, 1500, 0)))
    assert (len(train_ids), len(val_ids), len(eval_ids)) == (6000, 1500, 0)
    assert set(train_ids) | set(val_ids) == set(ids)
    assert set(train_ids).isdisjoint(val_ids)

    ids = [f"combined-{i}" for i in range(3136)]
    train_ids, val_ids, eval_ids = split(ids, SplitSpec(seed=9, counts=(1882, 626, 628)))
    assert (len(train_ids), len(val_ids), len(eval_ids)) == (1882, 626, 628)
    union = set(train_ids) | set(val_ids) | set(eval_ids)
    assert union == set(ids) and len(union) == 3136
    assert time.perf_counter() - start < 1.0


@criterion("architecture fidelity: 5120-256-64-5 and 5120-8192-2048-128-M, bit-exact round trip")
def test_architecture_fidelity(tmp_path):
    difficulty = init_mlp([5120, *DIFFICULTY_HIDDEN_DIMS, 5], seed=3)
    assert difficulty.layer_dims == (5120, 256, 64, 5)
    correctness = init_mlp([5120, *CORRECTNESS_HIDDEN_DIMS, 8], seed=4)
    assert correctness.layer_dims == (5120, 8192, 2048, 128, 8)
    for name, model in (("difficulty", difficulty), ("correctness", correctness)):
        path = tmp_path / f"{name}.rfmlp"
        write_checkpoint(model, path)
        back = read_checkpoint(path)
        assert back.layer_dims == model.layer_dims
        for la, lb in zip(model.layers, back.layers):
            assert la.activation is lb.activation
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.bias, lb.bias)
        path.unlink()  # reclaim ~0.5 GB before the next round trip


@criterion("planted layer-sweep: argmax layer == 3 in 5/5 seeds, < 2 min")
def test_planted_layer_sweep(tmp_path, capsys):
    start = time.perf_counter()
    hits = 0
    for seed in (1, 2, 3, 4, 5):
        out = tmp_path / f"pool{seed}"
        assert run_cli(
            "synth", "--out", out, "--seed", seed,
            "--n-problems", 300, "--dim", 16, "--n-models", 2,
            "--n-layers", 6, "--best-layer", 3, "--embedding-noise", 1.0,
        ) == 0
        assert run_cli(
            "sweep-layers", "--stores-dir", out / "layers",
            "--problems", out / "problems.jsonl",
            "--splits", out / "splits.json",
            "--out-prefix", out / "sweep",
            "--hidden-dims", "24", "--epochs", 8, "--learning-rate", "5e-3",
            "--seed", 0,
        ) == 0
        stdout = capsys.readouterr().out
        if "best layer: 3" in stdout:
            hits += 1
    elapsed = time.perf_counter() - start
    assert hits == 5, f"planted layer recovered in {hits}/5 seeds"
    assert elapsed < 120.0, f"took {elapsed:.1f}s"


@criterion("router degeneracy: out-of-range thresholds reproduce both baselines exactly")
def test_router_degeneracy():
    pool_data = synth_pool(
        SynthConfig(n_problems=80, dim=8, n_models=2, n_layers=1, best_layer=0, seed=17)
    )
    ids = [p.id for p in pool_data.problems]
    outcomes = pool_data.outcomes
    small = ModelProfile("m0", 0)
    large = ModelProfile("m1", 1)
    pool = ModelPool([small, large])
    small_base = baseline_point("m0", ids, outcomes)
    large_base = baseline_point("m1", ids, outcomes)

    rng = np.random.default_rng(0)
    scores = {pid: float(rng.uniform(1.0, 5.0)) for pid in ids}
    points, _ = sweep_difficulty(scores, [0.5, 5.5], small, large, ids, outcomes)
    assert (points[0].accuracy, points[0].mean_latency_s) == (
        large_base.accuracy, large_base.mean_latency_s,
    )
    assert (points[1].accuracy, points[1].mean_latency_s) == (
        small_base.accuracy, small_base.mean_latency_s,
    )

    probs = {pid: rng.uniform(0.05, 0.95, size=2) for pid in ids}
    points, _ = sweep_cascade(probs, [0.0, 1.0], pool, ids, outcomes)
    assert (points[0].accuracy, points[0].mean_latency_s) == (
        small_base.accuracy, small_base.mean_latency_s,
    )
    assert (points[1].accuracy, points[1].mean_latency_s) == (
        large_base.accuracy, large_base.mean_latency_s,
    )


@criterion("oracle equivalence: exhaustive <= 3 models x 6 problems (2^18 cases), < 1 min")
def test_oracle_equivalence():
    start = time.perf_counter()

    # direct loops over every matrix at the small sizes
    for n_models in (1, 2, 3):
        pool = ModelPool([ModelProfile(f"m{j}", j) for j in range(n_models)])
        for n_problems in (1, 2, 3, 4):
            for bits in itertools.product([False, True], repeat=n_models * n_problems):
                grid = np.asarray(bits).reshape(n_problems, n_models)
                oracle_hits = cascade_hits = 0
                for row in grid:
                    oi = int(route_oracle(row, pool).model_id[1:])
                    ci = int(route_cascade(row.astype(float), 0.5, pool).model_id[1:])
                    oracle_hits += row[oi]
                    cascade_hits += row[ci]
                best = int(grid.any(axis=1).sum())  # best deterministic policy
                assert cascade_hits == oracle_hits == best

    # 3 x 6 via per-row decisions of the real policies (policies act per
    # problem, so the 8 possible rows are their entire input space), then an
    # exhaustive vectorized sweep over all 2^18 matrices
    pool = ModelPool([ModelProfile(f"m{j}", j) for j in range(3)])
    oracle_hit = np.zeros(8, dtype=np.int64)
    cascade_hit = np.zeros(8, dtype=np.int64)
    union = np.zeros(8, dtype=np.int64)
    for code in range(8):
        row = np.array([(code >> j) & 1 for j in range(3)], dtype=bool)
        oracle_hit[code] = row[int(route_oracle(row, pool).model_id[1:])]
        cascade_hit[code] = row[int(route_cascade(row.astype(float), 0.5, pool).model_id[1:])]
        union[code] = row.any()

    matrices = np.arange(2**18, dtype=np.int64)
    oracle_acc = np.zeros(2**18, dtype=np.int64)
    cascade_acc = np.zeros(2**18, dtype=np.int64)
    best_acc = np.zeros(2**18, dtype=np.int64)
    for r in range(6):
        chunk = (matrices >> (3 * r)) & 7
        oracle_acc += oracle_hit[chunk]
        cascade_acc += cascade_hit[chunk]
        best_acc += union[chunk]
    assert np.array_equal(cascade_acc, oracle_acc)
    assert np.array_equal(oracle_acc, best_acc)  # no deterministic policy beats it
    assert time.perf_counter() - start < 60.0


@criterion("dominance: perfect-predictor cascade weakly above random segment, 10 seeds")
def test_dominance_property():
    grid = [round(0.05 * k, 10) for k in range(1, 19)]
    for seed in range(10):
        pool_data = synth_pool(
            SynthConfig(
                n_problems=120, dim=8, n_models=4, n_layers=1, best_layer=0,
                label_noise=0.0, seed=400 + seed,
            )
        )
        ids = [p.id for p in pool_data.problems]
        outcomes = pool_data.outcomes
        pool = ModelPool([ModelProfile(m, j) for j, m in enumerate(pool_data.model_ids)])
        perfect = {
            pid: outcomes.correctness_row(pid, pool.model_ids).astype(float) for pid in ids
        }
        points, _ = sweep_cascade(perfect, grid, pool, ids, outcomes)
        segment = BaselineSegment(
            baseline_point(pool.cheapest.model_id, ids, outcomes),
            baseline_point(pool.most_expensive.model_id, ids, outcomes),
        )
        for row in dominance_report(points, segment):
            assert row.margin >= -1e-12, f"seed {seed}: {row}"


@criterion("monotonicity: chosen cost rank monotone in threshold, 100 instances")
def test_monotonicity_property():
    # Direction is per policy, as the routing contracts define it: raising a
    # cascade threshold only escalates (rank non-decreasing), while raising a
    # difficulty threshold only keeps more problems on the small model (rank
    # non-increasing; "exceeds a threshold" sends fewer problems large).
    rng = np.random.default_rng(123)
    for _ in range(50):  # cascade instances
        n_models = int(rng.integers(2, 6))
        n_problems = int(rng.integers(2, 15))
        ids = [f"p{i}" for i in range(n_problems)]
        models = [f"m{j}" for j in range(n_models)]
        outcomes = OutcomeMatrix(
            problem_ids=ids, model_ids=models,
            correct=rng.random((n_problems, n_models)) < 0.5,
            latency=rng.random((n_problems, n_models)) + 0.01,
            mask=np.ones((n_problems, n_models), dtype=bool),
        )
        pool = ModelPool([ModelProfile(m, j) for j, m in enumerate(models)])
        probs = {pid: rng.random(n_models) for pid in ids}
        thresholds = sorted(float(t) for t in rng.random(6))
        _, decisions = sweep_cascade(probs, thresholds, pool, ids, outcomes)
        rank = {m: j for j, m in enumerate(models)}
        for lo, hi in zip(decisions, decisions[1:]):
            for d_lo, d_hi in zip(lo, hi):
                assert rank[d_hi.model_id] >= rank[d_lo.model_id]

    for _ in range(50):  # difficulty instances
        n_problems = int(rng.integers(2, 15))
        ids = [f"p{i}" for i in range(n_problems)]
        outcomes = OutcomeMatrix(
            problem_ids=ids, model_ids=["s", "l"],
            correct=rng.random((n_problems, 2)) < 0.5,
            latency=rng.random((n_problems, 2)) + 0.01,
            mask=np.ones((n_problems, 2), dtype=bool),
        )
        small, large = ModelProfile("s", 0), ModelProfile("l", 1)
        scores = {pid: float(rng.uniform(1, 5)) for pid in ids}
        thresholds = sorted(float(t) for t in rng.uniform(0.5, 5.5, size=6))
        _, decisions = sweep_difficulty(scores, thresholds, small, large, ids, outcomes)
        rank = {"s": 0, "l": 1}
        for lo, hi in zip(decisions, decisions[1:]):
            for d_lo, d_hi in zip(lo, hi):
                assert rank[d_hi.model_id] <= rank[d_lo.model_id]


@criterion("advantage-matrix algebra: antisymmetric, zero diagonal, hand case 1/1/0")
def test_advantage_matrix_algebra():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n, m = int(rng.integers(1, 40)), int(rng.integers(2, 7))
        outcomes = OutcomeMatrix(
            problem_ids=[f"p{i}" for i in range(n)],
            model_ids=[f"m{j}" for j in range(m)],
            correct=rng.random((n, m)) < rng.random(),
            latency=np.ones((n, m)),
            mask=np.ones((n, m), dtype=bool),
        )
        adv = advantage_matrix(outcomes)
        assert np.array_equal(adv.difference, -adv.difference.T)
        assert not np.diag(adv.counts).any()
        assert np.array_equal(adv.difference, adv.counts - adv.counts.T)

    hand = OutcomeMatrix(
        problem_ids=["q1", "q2", "q3"],
        model_ids=["A", "B"],
        correct=np.array([[True, False], [True, True], [False, True]]),
        latency=np.ones((3, 2)),
        mask=np.ones((3, 2), dtype=bool),
    )
    assert advantage_matrix(hand).pair("A", "B") == (1, 1, 0)


E2E_SYNTH_ARGS = [
    "--n-problems", 500, "--dim", 16, "--n-models", 4,
    "--n-layers", 6, "--best-layer", 3,
    "--embedding-noise", 1.0, "--label-noise", 0.02, "--seed", 1234,
]


@criterion("end-to-end synthetic: best cascade point >= 98% strongest accuracy "
           "at <= 75% latency, < 5 min")
def test_end_to_end_synthetic(tmp_path):
    start = time.perf_counter()
    data = tmp_path / "pool"
    assert run_cli("synth", "--out", data, *E2E_SYNTH_ARGS) == 0
    store = data / "layers" / "layer_03.rfemb"
    common = ["--splits", data / "splits.json",
              "--learning-rate", "5e-3", "--epochs", 20, "--seed", 5]
    assert run_cli(
        "train-difficulty", "--store", store,
        "--problems", data / "problems.jsonl",
        "--out-prefix", tmp_path / "diff", *common,
    ) == 0
    assert run_cli(
        "train-correctness", "--store", store,
        "--outcomes", data / "outcomes.csv", "--pool", data / "pool.json",
        "--out-prefix", tmp_path / "corr", "--hidden-dims", "64,32", *common,
    ) == 0
    assert run_cli(
        "route-eval", "--policy", "difficulty",
        "--predictor", tmp_path / "diff", "--store", store,
        "--outcomes", data / "outcomes.csv", "--pool", data / "pool.json",
        "--splits", data / "splits.json", "--out-prefix", tmp_path / "rep-diff-",
    ) == 0
    assert run_cli(
        "route-eval", "--policy", "cascade",
        "--predictor", tmp_path / "corr", "--store", store,
        "--outcomes", data / "outcomes.csv", "--pool", data / "pool.json",
        "--splits", data / "splits.json", "--out-prefix", tmp_path / "rep-casc-",
    ) == 0

    diff_points = read_points_csv(tmp_path / "rep-diff-points.csv")
    assert sum(p.label.startswith("difficulty@") for p in diff_points) == 9

    points = read_points_csv(tmp_path / "rep-casc-points.csv")
    routers = [p for p in points if p.label.startswith("cascade@")]
    strongest = max(
        (p for p in points if p.label.startswith("baseline:")),
        key=lambda p: p.mean_latency_s,
    )
    qualifying = [
        p for p in routers
        if p.accuracy >= 0.98 * strongest.accuracy
        and p.mean_latency_s <= 0.75 * strongest.mean_latency_s
    ]
    elapsed = time.perf_counter() - start
    assert qualifying, (
        f"no cascade point within 98% accuracy / 75% latency of strongest "
        f"(acc={strongest.accuracy}, lat={strongest.mean_latency_s})"
    )
    assert elapsed < 300.0, f"took {elapsed:.1f}s"


@criterion("determinism: every command rerun from its snapshot is byte-identical")
def test_determinism_all_commands(tmp_path):
    work = tmp_path / "work"

    def rerun_and_compare(command, snapshot):
        before = tree_bytes(work)
        assert run_cli(command, "--config", snapshot) == 0
        after = tree_bytes(work)
        assert set(before) == set(after)
        changed = [k for k in before if before[k] != after[k]]
        assert changed == [], f"{command}: {changed}"

    data = work / "data"
    assert run_cli(
        "synth", "--out", data, "--seed", 3, "--n-problems", 120, "--dim", 8,
        "--n-models", 3, "--n-layers", 2, "--best-layer", 1,
        "--embedding-noise", 0.8,
    ) == 0
    rerun_and_compare("synth", data / "synth.config.json")

    store = data / "layers" / "layer_01.rfemb"
    common = ["--splits", data / "splits.json", "--epochs", 4,
              "--learning-rate", "5e-3", "--seed", 2, "--hidden-dims", "16,8"]
    assert run_cli(
        "train-difficulty", "--store", store, "--problems", data / "problems.jsonl",
        "--out-prefix", work / "diff", *common,
    ) == 0
    rerun_and_compare("train-difficulty", work / "diff.config.json")

    assert run_cli(
        "train-correctness", "--store", store, "--outcomes", data / "outcomes.csv",
        "--pool", data / "pool.json", "--out-prefix", work / "corr", *common,
    ) == 0
    rerun_and_compare("train-correctness", work / "corr.config.json")

    assert run_cli(
        "sweep-layers", "--stores-dir", data / "layers",
        "--problems", data / "problems.jsonl", "--out-prefix", work / "sweep",
        *common,
    ) == 0
    rerun_and_compare("sweep-layers", work / "sweep.config.json")

    assert run_cli(
        "route-eval", "--policy", "cascade", "--predictor", work / "corr",
        "--store", store, "--outcomes", data / "outcomes.csv",
        "--pool", data / "pool.json", "--splits", data / "splits.json",
        "--out-prefix", work / "rep-",
    ) == 0
    rerun_and_compare("route-eval", work / "rep-config.json")

    assert run_cli(
        "advantage", "--outcomes", data / "outcomes.csv", "--out-prefix", work / "adv-",
    ) == 0
    rerun_and_compare("advantage", work / "adv-advantage.config.json")

    assert run_cli(
        "report", "--from-manifest", work / "rep-manifest.json",
        "--out-prefix", work / "re-",
    ) == 0
    rerun_and_compare("report", work / "re-report.config.json")


FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@criterion("[SECONDARY] format conformance: extractor fixtures parse with the primary reader")
def test_extractor_fixture_conformance():
    # The fixtures were generated once by the extractor tool on a tiny seeded
    # checkpoint (extractor/scripts/generate_fixture.py); checking them in
    # keeps this suite runnable with no extractor installed. The reader
    # verifies magic, structure, CRC, and finiteness; byte-identical repeated
    # extraction runs are covered in the extractor's own tests.
    names = sorted(n for n in os.listdir(FIXTURES) if n.endswith(".rfemb"))
    assert len(names) >= 2, "need at least two per-layer fixture stores"
    stores = [read_embedding_store(os.path.join(FIXTURES, n)) for n in names]
    id_sets = {frozenset(s.ids) for s in stores}
    assert len(id_sets) == 1, "per-layer id sets must be identical"
    assert len({s.embedder_id for s in stores}) == 1
    assert len({s.layer_index for s in stores}) == len(stores)
    for store in stores:
        assert store.dim == 64  # the tiny checkpoint's hidden size
        assert len(store) == 3


@criterion("[SECONDARY] fixtures join with labels and feed a probe without conversion")
def test_extractor_fixture_feeds_training():
    from routeforge.data import join
    from routeforge.nn import Batch, forward, init_mlp

    store = read_embedding_store(os.path.join(FIXTURES, "tiny_layer_01.rfemb"))
    labels = {pid: (i % 5) + 1 for i, pid in enumerate(store.ids)}
    x, y, kept = join(store, labels, store.ids)
    assert x.shape == (3, 64) and x.dtype == np.float64
    model = init_mlp([store.dim, 8, 5], seed=0)
    logits, _ = forward(model, x)
    assert logits.shape == (3, 5)
