"""Medication-mention tagging toolkit.

Offset-preserving tweet tokenization with forced custom splits, character
span to BIO label conversion and back, a trainable baseline token tagger
plus a probability-file contract for external models, probability-level
ensemble fusion with grid weight search, out-of-fold pipelines, and
strict/overlap entity-level evaluation.
"""

from .alignment import (
    B_DRUG,
    CLASS_ORDER,
    I_DRUG,
    LabeledTweet,
    O,
    bio_to_spans,
    repair_bio,
    spans_to_bio,
)
from .corpus import (
    Dataset,
    FoldAssignment,
    SpanAnnotation,
    Tweet,
    fold_views,
    load_annotations,
    load_tweets,
    save_annotations,
    save_tweets,
    split_folds,
)
from .ensemble import (
    EnsembleConfig,
    SearchResult,
    WeightGrid,
    drop_zero_members,
    fuse,
    load_ensemble_config,
    mean_fuse,
    save_ensemble_config,
    search_weights,
)
from .errors import ConfigError, DataValidationError, MedtagError
from .evaluation import EvalReport, diff_report, evaluate, match_spans, render_report_text
from .pipeline import RunConfig, RunResult, load_run_config, run
from .tagger import (
    BaselineModel,
    ProbMatrix,
    TrainConfig,
    decode,
    load_model,
    load_prob_file,
    predict_probs,
    save_model,
    train_baseline,
    write_prob_file,
)
from .tokenizer import (
    Token,
    TokenizedTweet,
    TokenizerRules,
    default_rules,
    project_labels_to_subtokens,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "B_DRUG",
    "BaselineModel",
    "CLASS_ORDER",
    "ConfigError",
    "Dataset",
    "DataValidationError",
    "EnsembleConfig",
    "EvalReport",
    "FoldAssignment",
    "I_DRUG",
    "LabeledTweet",
    "MedtagError",
    "O",
    "ProbMatrix",
    "RunConfig",
    "RunResult",
    "SearchResult",
    "SpanAnnotation",
    "Token",
    "TokenizedTweet",
    "TokenizerRules",
    "TrainConfig",
    "Tweet",
    "WeightGrid",
    "bio_to_spans",
    "decode",
    "default_rules",
    "diff_report",
    "drop_zero_members",
    "evaluate",
    "fold_views",
    "fuse",
    "load_annotations",
    "load_ensemble_config",
    "load_model",
    "load_prob_file",
    "load_run_config",
    "load_tweets",
    "match_spans",
    "mean_fuse",
    "predict_probs",
    "project_labels_to_subtokens",
    "render_report_text",
    "repair_bio",
    "run",
    "save_annotations",
    "save_ensemble_config",
    "save_model",
    "save_tweets",
    "search_weights",
    "spans_to_bio",
    "split_folds",
    "tokenize",
    "train_baseline",
    "write_prob_file",
]
