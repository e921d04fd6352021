"""rfextract command line: extract | verify."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .extract import DimMismatchError, ExtractionConfig, ExtractionError, extract
from .rfemb import StoreFormatError
from .verify import verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfextract",
        description="Dump per-layer causal-LM hidden states into *.rfemb stores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="run a model over problems and write stores")
    ex.add_argument("--model", required=True, help="hub id or local checkpoint path")
    ex.add_argument(
        "--layers", default="all",
        help='comma-separated indices into hidden_states (0 = embeddings), or "all"',
    )
    ex.add_argument("--problems", required=True, help="problems.jsonl")
    ex.add_argument("--out", required=True, help="output directory")
    ex.add_argument("--position", choices=("last", "mean"), default="last")
    ex.add_argument("--expect-dim", type=int, default=None,
                    help="fail unless the model hidden size equals this")
    ex.add_argument("--batch", type=int, default=8)
    ex.add_argument("--template", default=None,
                    help="prompt format string with a {text} placeholder")
    ex.add_argument("--device", default="cpu")
    ex.add_argument("--seed", type=int, default=0)

    ve = sub.add_parser("verify", help="re-parse and validate an output directory")
    ve.add_argument("--dir", required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            layers = "all" if args.layers == "all" else [
                int(v) for v in args.layers.split(",") if v.strip()
            ]
            config = ExtractionConfig(
                model=args.model,
                layers=layers,
                position=args.position,
                template=args.template,
                batch_size=args.batch,
                expect_dim=args.expect_dim,
                device=args.device,
                seed=args.seed,
            )
            written = extract(config, args.problems, args.out)
            print(f"wrote {len(written)} store(s) -> {args.out}")
            return 0
        report = verify(args.dir)
        for line in report.lines():
            print(line)
        return 0 if report.ok else 1
    except DimMismatchError as exc:
        print(f"dim error: {exc}", file=sys.stderr)
        return 2
    except (ExtractionError, StoreFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
