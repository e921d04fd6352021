import json

import pytest

from rfextract.tiny import build_tiny_checkpoint

PROBLEMS = [
    {"id": "p1", "text": "what is the sum of two and three ?", "source": "demo"},
    {"id": "p2", "text": "prove that seven is prime .", "source": "demo"},
    {"id": "p3", "text": "solve for x if x + 2 = 5", "source": "demo"},
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    return build_tiny_checkpoint(tmp_path_factory.mktemp("tiny-model"), seed=0)


@pytest.fixture(scope="session")
def problems_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("problems") / "problems.jsonl"
    with open(path, "w") as f:
        for p in PROBLEMS:
            f.write(json.dumps(p) + "\n")
    return path
