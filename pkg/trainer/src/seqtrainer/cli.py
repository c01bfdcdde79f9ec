"""Trainer command line: serve the wire protocol or generate the bundled
synthetic dataset."""

from __future__ import annotations

import argparse
import sys

from .data import DatasetError, FORMATS, generate_synthetic, ingest
from .serve import serve
from .train import TrainerSettings


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="answer evaluate requests on stdin")
    p_serve.add_argument("--dataset", required=True, help="dataset directory")
    p_serve.add_argument("--format", default="csv-sequences", choices=sorted(FORMATS))
    p_serve.add_argument("--session", action="store_true",
                         help="persistent session over one process")
    p_serve.add_argument("--lr", type=float, default=1e-4)
    p_serve.add_argument("--batch-size", type=int, default=256)
    p_serve.add_argument("--dropout", type=float, default=0.3)

    p_gen = sub.add_parser("gen-synthetic", help="write a synthetic dataset")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--n", type=int, default=600)
    p_gen.add_argument("--classes", type=int, default=3)
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--seq-len", type=int, default=16)
    p_gen.add_argument("--modality-dims", type=int, nargs="+", default=[3, 3])
    p_gen.add_argument("--folds", type=int, default=5)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "gen-synthetic":
        out = generate_synthetic(
            args.out, n=args.n, num_classes=args.classes, seed=args.seed,
            seq_len=args.seq_len, feature_dims=tuple(args.modality_dims),
            num_folds=args.folds)
        print(f"wrote {args.n} instances to {out}", file=sys.stderr)
        return 0
    try:
        dataset = ingest(args.dataset, args.format)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    settings = TrainerSettings(learning_rate=args.lr, batch_size=args.batch_size,
                               dropout=args.dropout)
    return serve(dataset, settings, session=args.session)


if __name__ == "__main__":
    sys.exit(main())
