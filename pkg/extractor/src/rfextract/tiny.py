"""Build a tiny local causal-LM checkpoint for tests and fixtures.

A randomly initialized Llama-architecture model (hidden size ~64) with a
word-level tokenizer, saved to a directory loadable by AutoModel/AutoTokenizer
with no network access. Seeded, so the checkpoint bytes are reproducible.
"""

from __future__ import annotations

import torch

VOCAB_WORDS = [
    "what", "is", "the", "sum", "of", "a", "an", "and", "if", "then",
    "prove", "that", "number", "two", "three", "five", "seven", "prime",
    "triangle", "angle", "solve", "for", "x", "y", "equation", "integral",
    "how", "many", "ways", "score", "level", "problem", "synthetic", "+",
    "-", "=", "?", ".", ",", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
]


def build_tiny_checkpoint(
    out_dir,
    hidden_size: int = 64,
    num_layers: int = 2,
    seed: int = 0,
) -> str:
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import LlamaConfig, LlamaForCausalLM, PreTrainedTokenizerFast

    out_dir = str(out_dir)
    vocab = {"[UNK]": 0, "[PAD]": 1}
    for word in VOCAB_WORDS:
        vocab.setdefault(word, len(vocab))
    tok = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = Whitespace()
    tokenizer = PreTrainedTokenizerFast(
        tokenizer_object=tok, unk_token="[UNK]", pad_token="[PAD]"
    )
    tokenizer.save_pretrained(out_dir)

    torch.manual_seed(seed)
    config = LlamaConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        intermediate_size=hidden_size * 2,
        num_hidden_layers=num_layers,
        num_attention_heads=4,
        num_key_value_heads=4,
        max_position_embeddings=128,
    )
    model = LlamaForCausalLM(config)
    model.save_pretrained(out_dir)
    return out_dir
