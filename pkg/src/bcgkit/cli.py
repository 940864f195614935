"""Command-line interface.

Subcommands: synth, detect, score, fuse, eval, sweep, report.  Exit codes:
0 success, 1 usage error, 2 data error, 3 missing external dependency.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .corpora import BUILTIN_SPECS
from .errors import BcgkitError, DependencyMissingError
from . import pipeline, synth

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DEPENDENCY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bcgkit",
                     description="BCG heartbeat detection and confidence-based fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    group = p_synth.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", type=Path, help="corpus spec file (key=value blocks)")
    group.add_argument("--builtin", choices=sorted(BUILTIN_SPECS),
                       help="use a built-in corpus specification")
    p_synth.add_argument("--out", type=Path, required=True, help="output corpus directory")

    for name, helptext in [
        ("detect", "run configured detectors over the corpus"),
        ("score", "compute per-epoch confidence scores"),
        ("fuse", "fuse detections into hybrid annotations"),
        ("eval", "evaluate detectors and hybrid against ground truth"),
        ("sweep", "threshold and weight-ratio sweeps"),
        ("report", "stratified report, index traces, error histograms"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, required=True, help="pipeline config file")
    return parser


def _load(path: Path) -> PipelineConfig:
    if not path.exists():
        raise BcgkitError(f"config file not found: {path}")
    return load_config(path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            if args.builtin:
                spec_text = BUILTIN_SPECS[args.builtin]()
                spec_path = args.out / "corpus.spec"
                args.out.mkdir(parents=True, exist_ok=True)
                spec_path.write_text(spec_text, encoding="utf-8")
            else:
                spec_path = args.spec
            manifest = synth.generate_corpus(spec_path, args.out)
            print(f"generated {len(manifest)} recordings in {args.out}")
        elif args.command == "detect":
            config = _load(args.config)
            detections = pipeline.run_detect(config)
            n = sum(len(v) for v in detections.values())
            print(f"wrote {n} annotations to {config.out_dir / 'annotations'}")
        elif args.command == "score":
            config = _load(args.config)
            pipeline.run_score(config)
            print(f"wrote scores to {config.out_dir / 'scores'}")
        elif args.command == "fuse":
            config = _load(args.config)
            fused = pipeline.run_fuse(config)
            print(f"fused {len(fused)} recordings into {config.out_dir / 'hybrid'}")
        elif args.command == "eval":
            config = _load(args.config)
            pipeline.run_eval(config)
            print(f"wrote evaluation to {config.out_dir / 'eval'}")
        elif args.command == "sweep":
            config = _load(args.config)
            pipeline.run_sweep(config)
            print(f"wrote sweep tables to {config.out_dir / 'sweep'}")
        elif args.command == "report":
            config = _load(args.config)
            result = pipeline.run_report(config)
            if result.get("empty"):
                print("warning: empty report (no results available)", file=sys.stderr)
            print(f"wrote report to {config.out_dir / 'report'}")
    except DependencyMissingError as exc:
        print(f"bcgkit: missing dependency: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except BcgkitError as exc:
        print(f"bcgkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
