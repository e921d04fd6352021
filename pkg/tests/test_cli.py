import filecmp
import json
import os
import subprocess
import sys

import pytest

from routeforge.cli import main, parse_thresholds
from routeforge.errors import ConfigError


def run_cli(*argv):
    return main([str(a) for a in argv])


def tree_bytes(root):
    """{relative path: bytes} for every file under root."""
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            path = os.path.join(dirpath, name)
            rel = os.path.relpath(path, root)
            with open(path, "rb") as f:
                out[rel] = f.read()
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small synth pool plus trained predictors, shared across CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert run_cli(
        "synth", "--out", data, "--seed", 7,
        "--n-problems", 200, "--dim", 10, "--n-models", 3,
        "--n-layers", 3, "--best-layer", 1, "--embedding-noise", 0.5,
    ) == 0
    common = [
        "--splits", data / "splits.json",
        "--epochs", 6, "--learning-rate", "5e-3", "--seed", 3,
    ]
    assert run_cli(
        "train-difficulty",
        "--store", data / "layers" / "layer_01.rfemb",
        "--problems", data / "problems.jsonl",
        "--out-prefix", root / "diff",
        "--hidden-dims", "24,12",
        *common,
    ) == 0
    assert run_cli(
        "train-correctness",
        "--store", data / "layers" / "layer_01.rfemb",
        "--outcomes", data / "outcomes.csv",
        "--pool", data / "pool.json",
        "--out-prefix", root / "corr",
        "--hidden-dims", "24,12",
        *common,
    ) == 0
    return root


class TestParseThresholds:
    def test_colon_grid_inclusive(self):
        grid = parse_thresholds("2.1:2.9:0.1")
        assert len(grid) == 9
        assert grid[0] == 2.1 and grid[-1] == 2.9

    def test_comma_list(self):
        assert parse_thresholds("0.1,0.5,0.9") == [0.1, 0.5, 0.9]

    def test_json_list(self):
        assert parse_thresholds([0.2, 0.4]) == [0.2, 0.4]

    def test_descending_rejected(self):
        with pytest.raises(ConfigError):
            parse_thresholds("0.9,0.1")


class TestSynth:
    def test_same_seed_identical_directories(self, tmp_path, monkeypatch):
        # identical command (relative --out) run from two working directories
        for name in ("a", "b"):
            (tmp_path / name).mkdir()
            monkeypatch.chdir(tmp_path / name)
            assert run_cli(
                "synth", "--out", "pool", "--seed", 7,
                "--n-problems", 60, "--dim", 6, "--n-models", 2, "--n-layers", 2,
                "--best-layer", 0,
            ) == 0
        a, b = tree_bytes(tmp_path / "a" / "pool"), tree_bytes(tmp_path / "b" / "pool")
        assert set(a) == set(b)
        mismatched = [k for k in a if a[k] != b[k]]
        assert mismatched == []

    def test_expected_artifacts(self, workspace):
        data = workspace / "data"
        for name in ("problems.jsonl", "outcomes.csv", "pool.json", "splits.json",
                     "synth.config.json"):
            assert (data / name).exists(), name
        layers = sorted(os.listdir(data / "layers"))
        assert layers == ["layer_00.rfemb", "layer_01.rfemb", "layer_02.rfemb"]


class TestExitCodes:
    def test_missing_required_key_is_config_error(self, capsys):
        rc = run_cli("train-difficulty", "--problems", "x.jsonl")
        assert rc == 2
        err = capsys.readouterr().err
        assert "store" in err  # message names the missing key

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"out": str(tmp_path / "o"), "bogus_key": 1}))
        assert run_cli("synth", "--config", cfg) == 2
        assert "bogus_key" in capsys.readouterr().err

    def test_missing_data_file_is_data_error(self, tmp_path):
        rc = run_cli(
            "train-difficulty",
            "--store", tmp_path / "nope.rfemb",
            "--problems", tmp_path / "nope.jsonl",
            "--splits", tmp_path / "nope.json",
            "--out-prefix", tmp_path / "x",
        )
        assert rc == 3

    def test_empty_sweep_dir_is_data_error(self, tmp_path, workspace):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = run_cli(
            "sweep-layers", "--stores-dir", empty,
            "--problems", workspace / "data" / "problems.jsonl",
            "--splits", workspace / "data" / "splits.json",
            "--out-prefix", tmp_path / "s",
        )
        assert rc == 3

    def test_numeric_abort_is_exit_four(self, workspace, tmp_path):
        data = workspace / "data"
        rc = run_cli(
            "train-difficulty",
            "--store", data / "layers" / "layer_01.rfemb",
            "--problems", data / "problems.jsonl",
            "--splits", data / "splits.json",
            "--out-prefix", tmp_path / "boom",
            "--hidden-dims", "8",
            "--epochs", 40, "--learning-rate", "1e200", "--optimizer", "sgd",
            "--checkpoint-policy", "last",
        )
        assert rc == 4


class TestSweepLayers:
    def test_prints_planted_layer(self, workspace, tmp_path, capsys):
        data = workspace / "data"
        rc = run_cli(
            "sweep-layers", "--stores-dir", data / "layers",
            "--problems", data / "problems.jsonl",
            "--splits", data / "splits.json",
            "--out-prefix", tmp_path / "sweep",
            "--hidden-dims", "16", "--epochs", 8, "--learning-rate", "5e-3",
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "best layer: 1" in out
        lines = (tmp_path / "sweep.sweep.csv").read_text().splitlines()
        assert lines[0] == "layer,metric_name,value"

    def test_single_store_dir(self, workspace, tmp_path):
        data = workspace / "data"
        single = tmp_path / "one"
        single.mkdir()
        (single / "layer_01.rfemb").write_bytes(
            (data / "layers" / "layer_01.rfemb").read_bytes()
        )
        rc = run_cli(
            "sweep-layers", "--stores-dir", single,
            "--problems", data / "problems.jsonl",
            "--splits", data / "splits.json",
            "--out-prefix", tmp_path / "one-sweep",
            "--hidden-dims", "8", "--epochs", 2,
        )
        assert rc == 0
        body = (tmp_path / "one-sweep.sweep.csv").read_text()
        assert body.count("\naccuracy".join([",", ","])) <= 1  # one layer only


class TestRouteEval:
    def test_difficulty_policy_default_grid(self, workspace, tmp_path, capsys):
        data = workspace / "data"
        out = tmp_path / "rep" / "diff-"
        rc = run_cli(
            "route-eval", "--policy", "difficulty",
            "--predictor", workspace / "diff",
            "--store", data / "layers" / "layer_01.rfemb",
            "--outcomes", data / "outcomes.csv",
            "--pool", data / "pool.json",
            "--splits", data / "splits.json",
            "--out-prefix", out,
        )
        assert rc == 0
        from routeforge.evaluation import read_points_csv

        points = read_points_csv(f"{out}points.csv")
        routers = [p for p in points if p.label.startswith("difficulty@")]
        baselines = [p for p in points if p.label.startswith("baseline:")]
        assert len(routers) == 9  # grid 2.1..2.9 step 0.1
        assert len(baselines) == 2
        assert (tmp_path / "rep" / "diff-segment.csv").exists()
        assert (tmp_path / "rep" / "diff-dominance.csv").exists()
        assert (tmp_path / "rep" / "diff-decisions.csv").exists()
        assert (tmp_path / "rep" / "diff-manifest.json").exists()

    def test_cascade_policy_includes_all_baselines(self, workspace, tmp_path):
        data = workspace / "data"
        out = tmp_path / "casc-"
        rc = run_cli(
            "route-eval", "--policy", "cascade",
            "--predictor", workspace / "corr",
            "--store", data / "layers" / "layer_01.rfemb",
            "--outcomes", data / "outcomes.csv",
            "--pool", data / "pool.json",
            "--splits", data / "splits.json",
            "--thresholds", "0.05:0.9:0.05",
            "--out-prefix", out,
        )
        assert rc == 0
        from routeforge.evaluation import read_points_csv

        points = read_points_csv(f"{out}points.csv")
        baselines = [p for p in points if p.label.startswith("baseline:")]
        assert len(baselines) == 3  # whole pool

    def test_oracle_policy_single_point(self, workspace, tmp_path):
        data = workspace / "data"
        out = tmp_path / "oracle-"
        rc = run_cli(
            "route-eval", "--policy", "oracle",
            "--outcomes", data / "outcomes.csv",
            "--pool", data / "pool.json",
            "--splits", data / "splits.json",
            "--out-prefix", out,
        )
        assert rc == 0
        from routeforge.evaluation import read_points_csv

        points = read_points_csv(f"{out}points.csv")
        assert sum(p.label == "oracle" for p in points) == 1

    def test_report_regenerates_identical_csvs(self, workspace, tmp_path):
        data = workspace / "data"
        out = tmp_path / "r1-"
        assert run_cli(
            "route-eval", "--policy", "oracle",
            "--outcomes", data / "outcomes.csv",
            "--pool", data / "pool.json",
            "--splits", data / "splits.json",
            "--out-prefix", out,
        ) == 0
        assert run_cli(
            "report", "--from-manifest", f"{out}manifest.json",
            "--out-prefix", tmp_path / "r2-",
        ) == 0
        for name in ("points.csv", "segment.csv", "dominance.csv", "decisions.csv",
                     "manifest.json"):
            a = (tmp_path / f"r1-{name}").read_bytes()
            b = (tmp_path / f"r2-{name}").read_bytes()
            assert a == b, name


class TestAdvantage:
    def test_matches_hand_counts(self, tmp_path, capsys):
        csv_path = tmp_path / "o.csv"
        csv_path.write_text(
            "problem_id,model_id,correct,latency_s\n"
            "q1,A,1,1.0\nq1,B,0,1.0\n"
            "q2,A,1,1.0\nq2,B,1,1.0\n"
            "q3,A,0,1.0\nq3,B,1,1.0\n"
        )
        rc = run_cli("advantage", "--outcomes", csv_path, "--out-prefix", tmp_path / "adv-")
        assert rc == 0
        body = (tmp_path / "adv-advantage.csv").read_text().splitlines()
        assert body[0] == "model_i,model_j,count_ij,count_ji,diff"
        assert body[1] == "A,B,1,1,0"


class TestSnapshotRerun:
    def test_train_rerun_from_snapshot_byte_identical(self, workspace, tmp_path):
        data = workspace / "data"
        prefix = tmp_path / "p1" / "pred"
        argv = [
            "train-difficulty",
            "--store", data / "layers" / "layer_01.rfemb",
            "--problems", data / "problems.jsonl",
            "--splits", data / "splits.json",
            "--out-prefix", prefix,
            "--hidden-dims", "12", "--epochs", 3, "--learning-rate", "5e-3",
        ]
        assert run_cli(*argv) == 0
        first = tree_bytes(tmp_path / "p1")

        # second run driven only by the snapshot, into a fresh directory
        snapshot = json.loads((tmp_path / "p1" / "pred.config.json").read_text())
        snapshot["out_prefix"] = str(tmp_path / "p2" / "pred")
        cfg = tmp_path / "rerun.json"
        cfg.write_text(json.dumps(snapshot))
        assert run_cli("train-difficulty", "--config", cfg) == 0
        second = tree_bytes(tmp_path / "p2")

        # everything except the snapshot itself (which embeds out_prefix)
        for name in first:
            if name.endswith(".config.json"):
                continue
            assert first[name] == second[name], name

    def test_synth_rerun_from_snapshot_byte_identical(self, tmp_path):
        assert run_cli(
            "synth", "--out", tmp_path / "s1", "--seed", 11,
            "--n-problems", 40, "--dim", 4, "--n-models", 2, "--n-layers", 2,
            "--best-layer", 0,
        ) == 0
        snapshot = json.loads((tmp_path / "s1" / "synth.config.json").read_text())
        snapshot["out"] = str(tmp_path / "s2")
        cfg = tmp_path / "rerun.json"
        cfg.write_text(json.dumps(snapshot))
        assert run_cli("synth", "--config", cfg) == 0
        a, b = tree_bytes(tmp_path / "s1"), tree_bytes(tmp_path / "s2")
        for name in a:
            if name.endswith(".config.json"):
                continue
            assert a[name] == b[name], name


def test_console_entry_point_help():
    proc = subprocess.run(
        [sys.executable, "-m", "routeforge", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    for cmd in ("synth", "train-difficulty", "route-eval", "advantage"):
        assert cmd in proc.stdout
