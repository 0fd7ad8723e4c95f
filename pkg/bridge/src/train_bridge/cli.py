"""Command line entry points: train, extract, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import DataError, TrainJob
from .checkpoints import CheckpointError
from .embed_extract import extract_embeddings
from .serve import serve
from .train import TrainJobError, finetune


def _cmd_train(args) -> int:
    if args.export_dir:
        job = TrainJob.from_export_dir(args.export_dir, checkpoint_id=args.checkpoint_id)
    else:
        if not args.dataset:
            raise DataError("either --export-dir or --dataset is required")
        job = TrainJob(
            dataset=Path(args.dataset),
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            adapter_rank=args.adapter_rank,
            alignment_config=Path(args.alignment) if args.alignment else None,
            checkpoint_id=args.checkpoint_id,
        )
    result = finetune(job, args.workdir, batch_size=args.batch_size)
    print(json.dumps(result, indent=2))
    return 0


def _cmd_extract(args) -> int:
    if args.texts_file:
        texts = [
            line for line in Path(args.texts_file).read_text(encoding="utf-8").splitlines()
            if line
        ]
    else:
        texts = args.text
    if not texts:
        raise DataError("no texts given; use --texts-file or --text")
    out = extract_embeddings(
        args.workdir, args.checkpoint, texts, args.out, source=args.source
    )
    print(f"wrote {len(texts)} embeddings to {out}")
    return 0


def _cmd_serve(args) -> int:
    serve(args.workdir, args.checkpoint, host=args.host, port=args.port,
          max_new=args.max_new)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="train-bridge",
        description="Fine-tune, embed with, and serve small adapter checkpoints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one fine-tuning job")
    p.add_argument("--export-dir", help="directory containing train_config.json")
    p.add_argument("--dataset", help="JSONL training set (when not using --export-dir)")
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--adapter-rank", type=int, default=8)
    p.add_argument("--alignment", help="alignment config JSON path")
    p.add_argument("--checkpoint-id", help="explicit checkpoint id")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--workdir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("extract", help="write embeddings for texts")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--texts-file", help="one text per line")
    p.add_argument("--text", action="append", default=[], help="repeatable inline text")
    p.add_argument("--source", default="original", choices=["original", "augmented"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("serve", help="serve a checkpoint over HTTP")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0, help="0 picks a free port")
    p.add_argument("--max-new", type=int, default=64)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, TrainJobError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
