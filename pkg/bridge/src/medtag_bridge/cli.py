"""Exporter command line.

Exit statuses: 0 success, 1 usage or model-load error, 2 data error
(malformed tokens file, sequence overflow), 3 internal error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import BridgeError, DataError, ModelLoadError
from .exporter import BridgeConfig, export_probs

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="medtag-bridge",
        description=(
            "Run a token-classification model over tokenized tweets and write "
            "a medtag-probs-v1 probability file."
        ),
    )
    parser.add_argument(
        "--model",
        required=True,
        help="'dummy', a stub-model .json path, or a Hugging Face model id/directory",
    )
    parser.add_argument("--tokens", required=True, help="tokens JSONL input")
    parser.add_argument("--out", required=True, help="probability JSONL output")
    parser.add_argument("--max-seq-len", type=int, default=512, dest="max_seq_len")
    parser.add_argument("--device", default=None, help="device hint for neural backends")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    if args.max_seq_len < 1:
        print(f"error: --max-seq-len must be >= 1, got {args.max_seq_len}", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = BridgeConfig(
            model=args.model,
            tokens_path=args.tokens,
            out_path=args.out,
            max_seq_len=args.max_seq_len,
            device=args.device,
        )
        count = export_probs(config)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BridgeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover (safety net)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(f"exported {count} tweets -> {args.out}")
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
