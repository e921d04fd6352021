"""Hidden-state extraction from a causal LM.

Runs the model over problem texts in inference mode and captures, per
selected layer, the hidden state at a single position per problem: the
final non-padding token by default, or the mean over non-padding tokens.
Layer index k addresses ``hidden_states[k]`` (0 = embedding output, k = the
output of transformer block k), so valid indices are 0..num_hidden_layers.
Captured vectors are stored as float32 regardless of compute precision.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import torch

from .rfemb import Store, load_problems, write_store


class ExtractionError(Exception):
    pass


class DimMismatchError(ExtractionError):
    """Model hidden size differs from the --expect-dim guard."""


@dataclass
class ExtractionConfig:
    model: str  # hub id or local path
    layers: Union[str, Sequence[int]] = "all"
    position: str = "last"  # "last" | "mean"
    template: Optional[str] = None  # python format string with {text}; None = default
    batch_size: int = 8
    expect_dim: Optional[int] = None
    device: str = "cpu"
    seed: int = 0

    def __post_init__(self):
        if self.position not in ("last", "mean"):
            raise ExtractionError(f"unknown position policy {self.position!r}")
        if self.batch_size < 1:
            raise ExtractionError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.template is not None and "{text}" not in self.template:
            raise ExtractionError("template must contain a {text} placeholder")


def load_model(config: ExtractionConfig):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModelForCausalLM.from_pretrained(config.model)
    model.eval()
    model.to(config.device)
    if tokenizer.pad_token is None:
        if tokenizer.eos_token is None:
            raise ExtractionError(
                f"{config.model}: tokenizer has neither pad nor eos token"
            )
        tokenizer.pad_token = tokenizer.eos_token
    tokenizer.padding_side = "right"  # last-token capture indexes from the left
    return model, tokenizer


def resolve_layers(config: ExtractionConfig, num_hidden_layers: int) -> list[int]:
    if config.layers == "all":
        return list(range(num_hidden_layers + 1))
    layers = sorted(int(k) for k in config.layers)
    if len(set(layers)) != len(layers):
        raise ExtractionError(f"duplicate layer indices: {layers}")
    for k in layers:
        if not 0 <= k <= num_hidden_layers:
            raise ExtractionError(
                f"layer {k} out of range [0, {num_hidden_layers}] for {config.model}"
            )
    return layers


def render_prompt(text: str, config: ExtractionConfig, tokenizer) -> str:
    if config.template is not None:
        return config.template.format(text=text)
    if getattr(tokenizer, "chat_template", None):
        return tokenizer.apply_chat_template(
            [{"role": "user", "content": text}],
            tokenize=False,
            add_generation_prompt=True,
        )
    return text


def _capture(hidden: torch.Tensor, attention_mask: torch.Tensor, position: str) -> torch.Tensor:
    """Reduce (batch, seq, dim) hidden states to one vector per sequence."""
    if position == "last":
        last = attention_mask.sum(dim=1) - 1  # right padding
        return hidden[torch.arange(hidden.shape[0]), last]
    mask = attention_mask.unsqueeze(-1).to(hidden.dtype)
    return (hidden * mask).sum(dim=1) / mask.sum(dim=1)


def extract(config: ExtractionConfig, problems_path, out_dir) -> list[str]:
    """Run the model over the problems; write one store per selected layer.

    Returns the written file paths. Deterministic for a fixed model and
    config: inference mode, no sampling, fp32 capture.
    """
    torch.manual_seed(config.seed)
    problems = load_problems(problems_path)
    if not problems:
        raise ExtractionError(f"{problems_path}: no problems")
    model, tokenizer = load_model(config)
    num_hidden_layers = int(model.config.num_hidden_layers)
    hidden_size = int(model.config.hidden_size)
    if config.expect_dim is not None and hidden_size != config.expect_dim:
        raise DimMismatchError(
            f"{config.model}: expected hidden size {config.expect_dim}, "
            f"model reports {hidden_size}"
        )
    layers = resolve_layers(config, num_hidden_layers)

    captured: dict[int, list[np.ndarray]] = {k: [] for k in layers}
    ids = [str(p["id"]) for p in problems]
    prompts = [render_prompt(str(p["text"]), config, tokenizer) for p in problems]
    for start in range(0, len(prompts), config.batch_size):
        chunk = prompts[start : start + config.batch_size]
        try:
            inputs = tokenizer(chunk, return_tensors="pt", padding=True).to(config.device)
            with torch.inference_mode():
                out = model(**inputs, output_hidden_states=True)
        except torch.cuda.OutOfMemoryError as exc:
            raise ExtractionError(
                f"out of memory on a batch of {len(chunk)}; retry with a smaller "
                f"--batch (current {config.batch_size})"
            ) from exc
        for k in layers:
            vecs = _capture(out.hidden_states[k], inputs["attention_mask"], config.position)
            captured[k].append(vecs.to(torch.float32).cpu().numpy())

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for k in layers:
        matrix = np.concatenate(captured[k], axis=0)
        store = Store(
            embedder_id=str(config.model),
            layer_index=k,
            dim=hidden_size,
            vectors={pid: matrix[i] for i, pid in enumerate(ids)},
        )
        path = os.path.join(out_dir, f"layer_{k:02d}.rfemb")
        write_store(store, path)
        written.append(path)

    snapshot = dataclasses.asdict(config)
    snapshot["layers"] = layers
    snapshot["hidden_size"] = hidden_size
    snapshot["position_policy"] = config.position
    snapshot["template_mode"] = (
        "custom" if config.template is not None
        else ("chat" if getattr(tokenizer, "chat_template", None) else "raw")
    )
    with open(os.path.join(out_dir, "extract.config.json"), "w", encoding="utf-8") as f:
        json.dump(snapshot, f, sort_keys=True, indent=2)
        f.write("\n")
    return written
