"""Standalone executable speaking the detector file protocol.

    dl-detector train --corpus <dir> --out <artifact-dir> [--seed N] ...
    dl-detector infer --model <artifact-dir> --signal <csv> --out <json>

Exit codes: 0 success, 1 usage error, 2 data/model error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import io as dlio
from .infer import DEFAULT_THRESHOLD, infer
from .model import ModelSpec, load_artifact
from .train import TrainSpec, TrainingFailure, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser():
    parser = _Parser(prog="dl-detector",
                     description="Learned J-peak detector for BCG signals")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a corpus directory")
    p_train.add_argument("--corpus", type=Path, required=True)
    p_train.add_argument("--out", type=Path, required=True,
                         help="model artifact directory to create")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--epochs", type=int, default=TrainSpec.epochs)
    p_train.add_argument("--batch-size", type=int, default=TrainSpec.batch_size)
    p_train.add_argument("--val-recordings", type=int, default=TrainSpec.val_recordings)

    p_infer = sub.add_parser("infer", help="annotate one signal file")
    p_infer.add_argument("--model", type=Path, required=True)
    p_infer.add_argument("--signal", type=Path, required=True)
    p_infer.add_argument("--out", type=Path, required=True)
    p_infer.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            spec = replace(TrainSpec(), epochs=args.epochs,
                           batch_size=args.batch_size,
                           val_recordings=args.val_recordings)
            meta = train(args.corpus, args.out, ModelSpec(), spec, seed=args.seed)
            print(f"saved model to {args.out} (best val BCE {meta['best_val_bce']:.4f})")
        elif args.command == "infer":
            model = load_artifact(args.model)
            signal = dlio.read_signal(args.signal)
            peaks = infer(model, signal, threshold=args.threshold)
            dlio.write_annotation(args.out, peaks, signal.label, source="dl")
            print(f"wrote {len(peaks)} beats to {args.out}")
    except (ValueError, FileNotFoundError, RuntimeError, TrainingFailure) as exc:
        print(f"dl-detector: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
