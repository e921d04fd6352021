"""Regenerate the tiny format-conformance fixtures for the main test suite.

Builds the seeded tiny checkpoint, extracts layers 0 and 1 over three
problems, and copies the stores into ../../tests/fixtures/. Run from
anywhere; writes relative to this repository checkout.
"""

import json
import os
import pathlib
import shutil
import tempfile

from rfextract.extract import ExtractionConfig, extract
from rfextract.tiny import build_tiny_checkpoint

PROBLEMS = [
    {"id": "p1", "text": "what is the sum of two and three ?", "source": "demo"},
    {"id": "p2", "text": "prove that seven is prime .", "source": "demo"},
    {"id": "p3", "text": "solve for x if x + 2 = 5", "source": "demo"},
]


def main():
    fixtures = pathlib.Path(__file__).resolve().parents[2] / "tests" / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        build_tiny_checkpoint(tmp / "tiny-checkpoint", seed=0)
        problems = tmp / "problems.jsonl"
        with open(problems, "w") as f:
            for p in PROBLEMS:
                f.write(json.dumps(p) + "\n")
        # chdir so the model reference (and thus the stores' embedder_id)
        # is the stable relative string, not a temp path
        cwd = os.getcwd()
        os.chdir(tmp)
        try:
            config = ExtractionConfig(model="tiny-checkpoint", layers=[0, 1], batch_size=2)
            written = extract(config, problems, tmp / "out")
        finally:
            os.chdir(cwd)
        for path in written:
            name = "tiny_" + pathlib.Path(path).name
            shutil.copyfile(path, fixtures / name)
            print(f"wrote {fixtures / name}")


if __name__ == "__main__":
    main()
