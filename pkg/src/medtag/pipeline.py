"""End-to-end runs: train, predict, fuse, decode, evaluate.

Three run modes share one artifact layout under the configured run
directory:

    tokens.jsonl          tokenization of the evaluation target
    folds.tsv             fold assignment (out-of-fold mode)
    model.json            trained model (single mode)
    model-fold{i}.json    per-fold models (out-of-fold mode)
    probs-{member}.jsonl  per-member probabilities on the target
    oof-probs.jsonl       held-out-fold probabilities over the training corpus
    fused.jsonl           fused probabilities on the target
    spans.tsv             decoded predicted spans (annotations TSV schema)
    report.json           strict + overlap evaluation report
    diff.tsv              false positives/negatives with text excerpts

Every random choice (folds, training order, weight search) is derived from
the single run seed through purpose-tagged sub-seeds, so one seed
reproduces a whole run byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .alignment import LabeledTweet, bio_to_spans, spans_to_bio
from .corpus import (
    Dataset,
    SpanAnnotation,
    load_annotations,
    load_tweets,
    save_annotations,
    save_fold_assignment,
    split_folds,
    fold_views,
)
from .ensemble import EnsembleConfig, fuse
from .errors import ConfigError, DataValidationError
from .evaluation import EvalReport, diff_report, evaluate, write_report_json
from .rng import derive_seed
from .tagger import (
    BaselineModel,
    ProbMatrix,
    TrainConfig,
    decode,
    load_prob_file,
    predict_probs,
    save_model,
    train_baseline,
    write_prob_file,
)
from .tokenizer import TokenizerRules, TokenizedTweet, load_rules, tokenize_dataset, write_tokens_file

MODES = ("single", "weighted-ensemble", "out-of-fold-ensemble")


@dataclass(frozen=True)
class RunConfig:
    """One JSON-loadable description of a full pipeline run."""

    mode: str
    out_dir: str
    seed: int = 0
    rules: str | None = None
    # training corpora (single and out-of-fold modes)
    train_tweets: str | None = None
    train_annotations: str | None = None
    dev_tweets: str | None = None
    dev_annotations: str | None = None
    # evaluation target
    test_tweets: str | None = None
    test_annotations: str | None = None
    k: int = 5
    epochs: int = 5
    learning_rate: float = 1.0
    # weighted-ensemble mode
    prob_files: tuple[str, ...] = ()
    weights: tuple[float, ...] | None = None
    mean: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        need = []
        if self.mode in ("single", "out-of-fold-ensemble"):
            if not self.train_tweets:
                need.append("train_tweets")
            if not self.train_annotations:
                need.append("train_annotations")
        if self.mode == "single":
            for f in ("dev_tweets", "dev_annotations", "test_tweets", "test_annotations"):
                if not getattr(self, f):
                    need.append(f)
        if self.mode == "out-of-fold-ensemble" and self.k < 2:
            raise ConfigError(f"out-of-fold mode needs k >= 2, got {self.k}")
        if self.mode == "weighted-ensemble":
            if not self.prob_files:
                need.append("prob_files")
            if not self.test_tweets:
                need.append("test_tweets")
            if not self.test_annotations:
                need.append("test_annotations")
        if need:
            raise ConfigError(f"mode {self.mode!r} requires config fields: {', '.join(need)}")
        if self.mode == "weighted-ensemble":
            if self.weights is None and not self.mean:
                raise ConfigError("weighted-ensemble mode needs 'weights' or 'mean': true")
            if self.weights is not None and len(self.weights) != len(self.prob_files):
                raise ConfigError(
                    f"{len(self.weights)} weights for {len(self.prob_files)} prob files"
                )


def load_run_config(path: str | Path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed run config: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: run config must be a JSON object")
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    if "prob_files" in obj:
        obj["prob_files"] = tuple(obj["prob_files"])
    if obj.get("weights") is not None:
        obj["weights"] = tuple(float(w) for w in obj["weights"])
    try:
        return RunConfig(**obj)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class RunResult:
    report: EvalReport
    out_dir: Path
    artifacts: dict[str, Path]


def _load_dataset(tweets_path: str, annotations_path: str | None) -> Dataset:
    tweets = tuple(load_tweets(tweets_path))
    dataset = Dataset(tweets)
    if annotations_path:
        annotations = tuple(load_annotations(annotations_path, dataset))
        dataset = Dataset(tweets, annotations)
    return dataset


def _label_dataset(dataset: Dataset, rules: TokenizerRules | None) -> list[LabeledTweet]:
    tokenized = tokenize_dataset(dataset.tweets, rules)
    labeled = []
    for item in tokenized:
        spans = dataset.annotations_for(item.tweet_id)
        labels, _ = spans_to_bio(item.tokens, spans)
        labeled.append(LabeledTweet(item.tweet_id, item.tokens, tuple(labels)))
    return labeled


def _predict_corpus(model: BaselineModel, tokenized: list[TokenizedTweet]) -> list[ProbMatrix]:
    return [predict_probs(model, item.tokens, tweet_id=item.tweet_id) for item in tokenized]


def _decode_to_spans(
    matrices: list[ProbMatrix], tokenized: list[TokenizedTweet], texts: dict[str, str]
) -> list[SpanAnnotation]:
    tokens_by_id = {item.tweet_id: item.tokens for item in tokenized}
    spans: list[SpanAnnotation] = []
    for matrix in matrices:
        tokens = tokens_by_id[matrix.tweet_id]
        labels = decode(matrix)
        spans.extend(
            bio_to_spans(texts[matrix.tweet_id], tokens, labels, tweet_id=matrix.tweet_id)
        )
    return spans


def _finish(
    out: Path,
    dataset: Dataset,
    gold: list[SpanAnnotation],
    pred: list[SpanAnnotation],
    artifacts: dict[str, Path],
) -> RunResult:
    spans_path = out / "spans.tsv"
    save_annotations(spans_path, pred)
    report = evaluate(dataset, gold, pred)
    report_path = out / "report.json"
    write_report_json(report_path, report)
    diff_path = out / "diff.tsv"
    diff_report(report, diff_path)
    artifacts.update({"spans": spans_path, "report": report_path, "diff": diff_path})
    return RunResult(report=report, out_dir=out, artifacts=artifacts)


def run(config: RunConfig) -> RunResult:
    """Dispatch a run by mode. See the module docstring for artifacts."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rules = load_rules(config.rules) if config.rules else None
    if config.mode == "single":
        return _run_single(config, out, rules)
    if config.mode == "out-of-fold-ensemble":
        return run_out_of_fold(config, out, rules)
    return run_weighted_ensemble(config, out)


def _run_single(config: RunConfig, out: Path, rules: TokenizerRules | None) -> RunResult:
    train_ds = _load_dataset(config.train_tweets, config.train_annotations)
    dev_ds = _load_dataset(config.dev_tweets, config.dev_annotations)
    test_ds = _load_dataset(config.test_tweets, config.test_annotations)

    model = train_baseline(
        _label_dataset(train_ds, rules),
        _label_dataset(dev_ds, rules),
        TrainConfig(
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            seed=derive_seed(config.seed, "train"),
        ),
    )
    model_path = out / "model.json"
    save_model(model_path, model)

    tokenized = tokenize_dataset(test_ds.tweets, rules)
    tokens_path = out / "tokens.jsonl"
    write_tokens_file(tokens_path, tokenized)
    matrices = _predict_corpus(model, tokenized)
    probs_path = out / "probs-model.jsonl"
    write_prob_file(probs_path, matrices)

    pred = _decode_to_spans(matrices, tokenized, test_ds.text_by_id())
    artifacts = {"model": model_path, "tokens": tokens_path, "probs-model": probs_path}
    return _finish(out, test_ds, list(test_ds.annotations), pred, artifacts)


def run_out_of_fold(
    config: RunConfig, out: Path | None = None, rules: TokenizerRules | None = None
) -> RunResult:
    """Out-of-fold training and mean-fusion prediction.

    Train and dev corpora (when both are given) are combined, split into k
    folds, and one model is trained per held-out fold with best-epoch
    selection on that fold. Each model scores its own held-out fold, which
    yields out-of-fold probabilities covering the whole corpus exactly
    once. When a test set is configured the k models also score it and
    their mean fusion is evaluated there; otherwise the out-of-fold
    predictions are evaluated against the training gold.
    """
    if out is None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rules = load_rules(config.rules) if config.rules else None
    combined = _load_dataset(config.train_tweets, config.train_annotations)
    if config.dev_tweets:
        dev_ds = _load_dataset(config.dev_tweets, config.dev_annotations)
        ids = {t.id for t in combined.tweets} & {t.id for t in dev_ds.tweets}
        if ids:
            raise DataValidationError(
                f"train and dev corpora share tweet ids: {sorted(ids)[:3]}"
            )
        combined = Dataset(
            combined.tweets + dev_ds.tweets, combined.annotations + dev_ds.annotations
        )

    fa = split_folds(combined, config.k, derive_seed(config.seed, "folds"))
    folds_path = out / "folds.tsv"
    save_fold_assignment(folds_path, fa)
    artifacts: dict[str, Path] = {"folds": folds_path}

    labeled_by_id = {item.tweet_id: item for item in _label_dataset(combined, rules)}
    corpus_tokenized = [
        TokenizedTweet(item.tweet_id, item.tokens) for item in labeled_by_id.values()
    ]

    test_ds = None
    test_tokenized = None
    if config.test_tweets:
        test_ds = _load_dataset(config.test_tweets, config.test_annotations)
        test_tokenized = tokenize_dataset(test_ds.tweets, rules)
        tokens_path = out / "tokens.jsonl"
        write_tokens_file(tokens_path, test_tokenized)
        artifacts["tokens"] = tokens_path
    else:
        tokens_path = out / "tokens.jsonl"
        write_tokens_file(tokens_path, corpus_tokenized)
        artifacts["tokens"] = tokens_path

    oof: dict[str, ProbMatrix] = {}
    test_members: list[list[ProbMatrix]] = []
    for fold in range(fa.k):
        train_view, held_view = fold_views(combined, fa, fold)
        model = train_baseline(
            [labeled_by_id[t.id] for t in train_view.tweets],
            [labeled_by_id[t.id] for t in held_view.tweets],
            TrainConfig(
                epochs=config.epochs,
                learning_rate=config.learning_rate,
                seed=derive_seed(config.seed, f"train-fold{fold}"),
            ),
        )
        model_path = out / f"model-fold{fold}.json"
        save_model(model_path, model)
        artifacts[f"model-fold{fold}"] = model_path
        for tweet in held_view.tweets:
            item = labeled_by_id[tweet.id]
            oof[tweet.id] = predict_probs(model, item.tokens, tweet_id=tweet.id)
        if test_tokenized is not None:
            member_matrices = _predict_corpus(model, test_tokenized)
            probs_path = out / f"probs-fold{fold}.jsonl"
            write_prob_file(probs_path, member_matrices)
            artifacts[f"probs-fold{fold}"] = probs_path
            test_members.append(member_matrices)

    oof_matrices = [oof[tweet.id] for tweet in combined.tweets]
    oof_path = out / "oof-probs.jsonl"
    write_prob_file(oof_path, oof_matrices)
    artifacts["oof-probs"] = oof_path

    if test_ds is not None and test_tokenized is not None:
        member_names = tuple(f"fold{i}" for i in range(fa.k))
        econfig = EnsembleConfig(member_names, (1.0,) * fa.k)
        fused = [
            fuse([member[i] for member in test_members], econfig)
            for i in range(len(test_tokenized))
        ]
        fused_path = out / "fused.jsonl"
        write_prob_file(fused_path, fused)
        artifacts["fused"] = fused_path
        pred = _decode_to_spans(fused, test_tokenized, test_ds.text_by_id())
        return _finish(out, test_ds, list(test_ds.annotations), pred, artifacts)

    pred = _decode_to_spans(oof_matrices, corpus_tokenized, combined.text_by_id())
    return _finish(out, combined, list(combined.annotations), pred, artifacts)


def run_weighted_ensemble(config: RunConfig, out: Path | None = None) -> RunResult:
    """Fuse member probability files with fixed weights and evaluate."""
    if out is None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
    members = [load_prob_file(path) for path in config.prob_files]
    member_names = tuple(Path(p).stem for p in config.prob_files)
    weights = config.weights if config.weights is not None else (1.0,) * len(members)
    econfig = EnsembleConfig(member_names, tuple(weights))

    reference = members[0]
    ref_ids = [m.tweet_id for m in reference]
    for k, member in enumerate(members[1:], 1):
        if [m.tweet_id for m in member] != ref_ids:
            raise DataValidationError(
                f"{config.prob_files[k]}: member covers different tweets than "
                f"{config.prob_files[0]}"
            )

    fused = [fuse([member[i] for member in members], econfig) for i in range(len(reference))]
    fused_path = out / "fused.jsonl"
    write_prob_file(fused_path, fused)

    test_ds = _load_dataset(config.test_tweets, config.test_annotations)
    texts = test_ds.text_by_id()
    rules = load_rules(config.rules) if config.rules else None
    tokenized = tokenize_dataset(test_ds.tweets, rules)
    tokens_by_id = {item.tweet_id: item for item in tokenized}
    pred: list[SpanAnnotation] = []
    for matrix in fused:
        if matrix.tweet_id not in tokens_by_id:
            raise DataValidationError(
                f"probability file covers unknown tweet {matrix.tweet_id!r}"
            )
        item = tokens_by_id[matrix.tweet_id]
        offsets = tuple((t.start, t.end) for t in item.tokens)
        if offsets != matrix.token_offsets:
            raise DataValidationError(
                f"tweet {matrix.tweet_id!r}: probability offsets do not match the "
                "tokenization of the test tweets"
            )
        labels = decode(matrix)
        pred.extend(
            bio_to_spans(texts[matrix.tweet_id], item.tokens, labels, tweet_id=matrix.tweet_id)
        )
    artifacts = {"fused": fused_path}
    return _finish(out, test_ds, list(test_ds.annotations), pred, artifacts)
