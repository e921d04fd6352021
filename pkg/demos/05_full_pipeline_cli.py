"""The whole pipeline through the command-line interface.

synth -> train both probes -> sweep layers -> route-eval both policies ->
advantage matrix, all in a temporary directory, exactly as a shell user
would run it. Every step writes a resolved-config snapshot that reproduces
its outputs byte for byte.
"""

import json
import tempfile
from pathlib import Path

from routeforge.cli import main


def run(*argv):
    argv = [str(a) for a in argv]
    print(f"\n$ routeforge {' '.join(argv)}")
    rc = main(argv)
    assert rc == 0, f"exit code {rc}"


with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    data = root / "pool"
    run("synth", "--out", data, "--seed", 1234, "--n-problems", 400,
        "--dim", 16, "--n-models", 4, "--n-layers", 6, "--best-layer", 3,
        "--embedding-noise", 1.0, "--label-noise", 0.02)

    store = data / "layers" / "layer_03.rfemb"
    run("sweep-layers", "--stores-dir", data / "layers",
        "--problems", data / "problems.jsonl", "--splits", data / "splits.json",
        "--hidden-dims", "24", "--epochs", 8, "--learning-rate", "5e-3",
        "--out-prefix", root / "sweep")

    run("train-difficulty", "--store", store,
        "--problems", data / "problems.jsonl", "--splits", data / "splits.json",
        "--learning-rate", "5e-3", "--out-prefix", root / "diff")

    run("train-correctness", "--store", store,
        "--outcomes", data / "outcomes.csv", "--pool", data / "pool.json",
        "--splits", data / "splits.json", "--hidden-dims", "64,32",
        "--learning-rate", "5e-3", "--out-prefix", root / "corr")

    run("route-eval", "--policy", "difficulty", "--predictor", root / "diff",
        "--store", store, "--outcomes", data / "outcomes.csv",
        "--pool", data / "pool.json", "--splits", data / "splits.json",
        "--out-prefix", root / "rep-diff-")

    run("route-eval", "--policy", "cascade", "--predictor", root / "corr",
        "--store", store, "--outcomes", data / "outcomes.csv",
        "--pool", data / "pool.json", "--splits", data / "splits.json",
        "--out-prefix", root / "rep-casc-")

    run("advantage", "--outcomes", data / "outcomes.csv", "--out-prefix", root / "adv-")

    manifest = json.loads((root / "rep-casc-manifest.json").read_text())
    print("\nemitted report files:", ", ".join(sorted(manifest["files"])))
    best = max(
        (p for p in manifest["data"]["points"] if p["label"].startswith("cascade@")),
        key=lambda p: (p["accuracy"], -p["mean_latency_s"]),
    )
    strongest = max(
        (p for p in manifest["data"]["points"] if p["label"].startswith("baseline:")),
        key=lambda p: p["mean_latency_s"],
    )
    print(f"best cascade point: acc={best['accuracy']:.3f} at {best['mean_latency_s']:.2f}s "
          f"vs strongest baseline acc={strongest['accuracy']:.3f} "
          f"at {strongest['mean_latency_s']:.2f}s")
