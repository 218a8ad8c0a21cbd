"""Command-line interface: every pipeline stage as a subcommand.

Exit statuses: 0 success, 1 usage or configuration error, 2 data
validation error (with file/line context where available), 3 internal
error. Unknown flags print usage on standard error and exit 1. All output
files are written atomically (temp file plus rename), so a failing command
never leaves partial output. The environment variable MEDTAG_SEED supplies
the default seed wherever --seed is omitted.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .alignment import LabeledTweet, bio_to_spans, load_labeled_file, spans_to_bio, write_labeled_file
from .corpus import (
    Dataset,
    load_annotations,
    load_tweets,
    read_annotations,
    save_annotations,
    save_fold_assignment,
    split_folds,
)
from .ensemble import (
    EnsembleConfig,
    WeightGrid,
    drop_zero_members,
    fuse,
    load_ensemble_config,
    search_weights,
)
from .errors import ConfigError, DataValidationError, MedtagError
from .evaluation import diff_report, evaluate, render_report_text, write_report_json
from .fileio import atomic_write, dump_json_line
from .pipeline import load_run_config, run
from .tagger import (
    TrainConfig,
    load_model,
    load_prob_file,
    predict_probs,
    save_model,
    train_baseline,
    write_prob_file,
)
from .tokenizer import load_rules, load_tokens_file, tokenize, write_tokens_file, TokenizedTweet

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (not 2) on usage errors."""

    def error(self, message: str) -> None:  # noqa: D401 (argparse contract)
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("MEDTAG_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"MEDTAG_SEED must be an integer, got {raw!r}") from exc


def _parse_weights(raw: str) -> tuple[float, ...]:
    try:
        weights = tuple(float(part) for part in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"--weights must be comma-separated numbers, got {raw!r}") from exc
    if not weights:
        raise ConfigError("--weights must name at least one weight")
    return weights


def build_parser() -> _Parser:
    parser = _Parser(prog="medtag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"medtag {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("tokenize", help="tokenize a tweets file")
    p.add_argument("--in", dest="in_path", required=True, help="tweets JSONL")
    p.add_argument("--rules", help="optional tokenizer rules JSON")
    p.add_argument("--out", required=True, help="tokens JSONL to write")
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser("bio", help="convert spans to BIO labels (or back with --reverse)")
    p.add_argument("--tokens", help="tokens JSONL (forward mode)")
    p.add_argument("--spans", help="gold spans TSV (forward mode)")
    p.add_argument("--reverse", action="store_true", help="decode labeled JSONL back to spans")
    p.add_argument("--labeled", help="labeled JSONL (reverse mode)")
    p.add_argument("--tweets", help="tweets JSONL (reverse mode, for surfaces; optional forward for validation)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bio)

    p = sub.add_parser("train", help="train the baseline tagger")
    p.add_argument("--labeled", required=True, help="training labeled JSONL")
    p.add_argument("--dev", required=True, help="development labeled JSONL")
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=1.0, help="perceptron update size")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="model JSON to write")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="write per-token class probabilities")
    p.add_argument("--model", required=True)
    p.add_argument("--tokens", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("fuse", help="fuse member probability files")
    p.add_argument("--probs", nargs="+", required=True, help="member probability files")
    p.add_argument("--weights", help="comma-separated weights, e.g. 1,2,1.2")
    p.add_argument("--mean", action="store_true", help="uniform mean fusion")
    p.add_argument(
        "--config",
        help="ensemble config JSON {members, weights}; members matched to prob file stems",
    )
    p.add_argument("--drop-zeros", action="store_true", help="drop zero-weight members first")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("search-weights", help="random-search ensemble weights")
    p.add_argument("--probs", nargs="+", required=True, help="member dev probability files")
    p.add_argument("--gold", required=True, help="gold spans TSV")
    p.add_argument("--tokens", required=True, help="dev tokens JSONL")
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--objective", choices=("strict", "overlap"), default="strict")
    p.add_argument("--exhaustive", action="store_true", help="evaluate every grid point instead of sampling")
    p.add_argument("--out", help="search report JSON")
    p.set_defaults(func=_cmd_search_weights)

    p = sub.add_parser("split", help="assign tweets to k folds")
    p.add_argument("--in", dest="in_path", required=True, help="tweets JSONL")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="folds TSV")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("eval", help="strict/overlap entity evaluation")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--tweets", required=True)
    p.add_argument("--out", help="report JSON")
    p.add_argument("--diff", help="FP/FN detail TSV")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="full pipeline from a run config")
    p.add_argument("--config", required=True, help="run config JSON")
    p.set_defaults(func=_cmd_run)

    return parser


def _cmd_tokenize(args) -> int:
    tweets = load_tweets(args.in_path)
    rules = load_rules(args.rules) if args.rules else None
    tokenized = [TokenizedTweet(t.id, tuple(tokenize(t.text, rules))) for t in tweets]
    write_tokens_file(args.out, tokenized)
    print(f"tokenized {len(tokenized)} tweets -> {args.out}")
    return EXIT_OK


def _cmd_bio(args) -> int:
    if args.reverse:
        if not args.labeled or not args.tweets:
            raise ConfigError("--reverse needs --labeled and --tweets")
        labeled = load_labeled_file(args.labeled)
        texts = {t.id: t.text for t in load_tweets(args.tweets)}
        spans = []
        for item in labeled:
            if item.tweet_id not in texts:
                raise DataValidationError(f"unknown tweet id {item.tweet_id!r} in {args.labeled}")
            spans.extend(
                bio_to_spans(
                    texts[item.tweet_id], item.tokens, item.labels, tweet_id=item.tweet_id
                )
            )
        save_annotations(args.out, spans)
        print(f"decoded {len(spans)} spans -> {args.out}")
        return EXIT_OK
    if not args.tokens or not args.spans:
        raise ConfigError("forward mode needs --tokens and --spans")
    tokenized = load_tokens_file(args.tokens)
    if args.tweets:
        tweets = load_tweets(args.tweets)
        annotations = load_annotations(args.spans, Dataset(tuple(tweets)))
    else:
        annotations = read_annotations(args.spans)
    by_tweet: dict[str, list] = {}
    for ann in annotations:
        by_tweet.setdefault(ann.tweet_id, []).append(ann)
    labeled = []
    n_warnings = 0
    for item in tokenized:
        labels, warnings = spans_to_bio(item.tokens, by_tweet.get(item.tweet_id, []))
        for w in warnings:
            print(f"warning: {item.tweet_id}: {w}", file=sys.stderr)
        n_warnings += len(warnings)
        labeled.append(LabeledTweet(item.tweet_id, item.tokens, tuple(labels)))
    write_labeled_file(args.out, labeled)
    print(f"labeled {len(labeled)} tweets ({n_warnings} warnings) -> {args.out}")
    return EXIT_OK


def _cmd_train(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    model = train_baseline(
        load_labeled_file(args.labeled),
        load_labeled_file(args.dev),
        TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=seed),
    )
    save_model(args.out, model)
    print(
        f"trained: best epoch {model.best_epoch}, dev token F1 {model.dev_f1:.3f} -> {args.out}"
    )
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    tokenized = load_tokens_file(args.tokens)
    matrices = [predict_probs(model, item.tokens, tweet_id=item.tweet_id) for item in tokenized]
    write_prob_file(args.out, matrices)
    print(f"predicted {len(matrices)} tweets -> {args.out}")
    return EXIT_OK


def _cmd_fuse(args) -> int:
    chosen = [flag for flag, value in
              (("--weights", args.weights), ("--mean", args.mean), ("--config", args.config))
              if value]
    if len(chosen) != 1:
        raise ConfigError("fuse needs exactly one of --weights, --mean, or --config")
    members = [load_prob_file(path) for path in args.probs]
    names = tuple(Path(p).stem for p in args.probs)
    if args.config:
        file_config = load_ensemble_config(args.config)
        if sorted(file_config.member_names) != sorted(names):
            raise ConfigError(
                f"{args.config}: members {sorted(file_config.member_names)} do not match "
                f"the probability file stems {sorted(names)}"
            )
        weight_by_name = dict(zip(file_config.member_names, file_config.weights))
        weights = tuple(weight_by_name[name] for name in names)
    elif args.mean:
        weights = (1.0,) * len(members)
    else:
        weights = _parse_weights(args.weights)
    config = EnsembleConfig(names, weights)
    if args.drop_zeros:
        config = drop_zero_members(config)
        keep = set(config.member_names)
        members = [m for name, m in zip(names, members) if name in keep]
    if len(members) != len(config.weights):
        raise ConfigError(
            f"{len(members)} probability files but {len(config.weights)} weights"
        )
    reference = members[0]
    for k, member in enumerate(members[1:], 1):
        if [m.tweet_id for m in member] != [m.tweet_id for m in reference]:
            raise DataValidationError(
                f"{args.probs[k]}: covers different tweets than {args.probs[0]}"
            )
    fused = [fuse([member[i] for member in members], config) for i in range(len(reference))]
    write_prob_file(args.out, fused)
    print(f"fused {len(members)} members over {len(fused)} tweets -> {args.out}")
    return EXIT_OK


def _cmd_search_weights(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.iters < 1:
        raise ConfigError(f"--iters must be >= 1, got {args.iters}")
    grid = WeightGrid(low=args.low, high=args.high, step=args.step, iterations=args.iters, seed=seed)
    members = [load_prob_file(path) for path in args.probs]
    names = tuple(Path(p).stem for p in args.probs)
    gold = read_annotations(args.gold)
    tokens = load_tokens_file(args.tokens)
    result = search_weights(
        members,
        gold,
        tokens,
        grid,
        member_names=names,
        objective=args.objective,
        exhaustive=args.exhaustive,
    )
    weights_text = ",".join(f"{w:g}" for w in result.best.weights)
    print(f"best {args.objective} F1 {result.best_f1:.4f} with weights {weights_text}")
    if args.out:
        with atomic_write(args.out) as fh:
            fh.write(
                dump_json_line(
                    {
                        "members": list(result.best.member_names),
                        "best_weights": list(result.best.weights),
                        "best_f1": result.best_f1,
                        "objective": args.objective,
                        "grid": {
                            "low": grid.low,
                            "high": grid.high,
                            "step": grid.step,
                            "iterations": grid.iterations,
                            "seed": grid.seed,
                        },
                        "exhaustive": args.exhaustive,
                        "trace": [
                            {"weights": list(w), "f1": f1} for w, f1 in result.trace
                        ],
                    }
                )
                + "\n"
            )
        print(f"search report -> {args.out}")
    return EXIT_OK


def _cmd_split(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    tweets = load_tweets(args.in_path)
    fa = split_folds(Dataset(tuple(tweets)), args.k, seed)
    save_fold_assignment(args.out, fa)
    print(f"assigned {len(tweets)} tweets to {args.k} folds -> {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    tweets = load_tweets(args.tweets)
    dataset = Dataset(tuple(tweets))
    gold = load_annotations(args.gold, dataset)
    pred = load_annotations(args.pred, dataset)
    report = evaluate(dataset, gold, pred)
    sys.stdout.write(render_report_text(report))
    if args.out:
        write_report_json(args.out, report)
        print(f"report -> {args.out}")
    if args.diff:
        diff_report(report, args.diff)
        print(f"diff -> {args.diff}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = load_run_config(args.config)
    result = run(config)
    sys.stdout.write(render_report_text(result.report))
    print(f"artifacts -> {result.out_dir}")
    return EXIT_OK


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MedtagError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover (safety net)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
