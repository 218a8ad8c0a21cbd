"""Probability-level model fusion and ensemble weight search.

Fusion is a weighted average of the member probability rows, normalized by
the weight sum, so scaling every weight by the same positive constant
leaves the result unchanged and rows keep summing to 1. Weights are found
by random search over a fixed grid (uniform per coordinate, all-zero
vectors rejected), scored end to end: fuse, argmax-decode, span-decode,
then entity-level F1 against gold spans.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .alignment import CLASS_ORDER, bio_to_spans, repair_bio
from .corpus import SpanAnnotation
from .errors import ConfigError, DataValidationError
from .evaluation import count_matches, prf
from .fileio import atomic_write
from .rng import SplitMix64
from .tagger import ProbMatrix
from .tokenizer import TokenizedTweet


@dataclass(frozen=True)
class EnsembleConfig:
    """Named ensemble members and their non-negative fusion weights."""

    member_names: tuple[str, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.member_names) != len(self.weights):
            raise ConfigError(
                f"{len(self.member_names)} member names but {len(self.weights)} weights"
            )
        if not self.member_names:
            raise ConfigError("an ensemble needs at least one member")
        for w in self.weights:
            if not math.isfinite(w) or w < 0:
                raise ConfigError(f"weights must be finite and >= 0, got {w!r}")
        if all(w == 0.0 for w in self.weights):
            raise ConfigError("at least one ensemble weight must be positive")


@dataclass(frozen=True)
class WeightGrid:
    """Search lattice {low, low+step, ..., high} plus sampling parameters."""

    low: float
    high: float
    step: float
    iterations: int
    seed: int

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ConfigError(f"grid low {self.low} exceeds high {self.high}")
        if self.step <= 0:
            raise ConfigError(f"grid step must be > 0, got {self.step}")
        span = self.high - self.low
        steps = span / self.step
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError(
                f"grid span {span} is not an integer multiple of step {self.step}"
            )
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")

    def values(self) -> tuple[float, ...]:
        n = round((self.high - self.low) / self.step)
        return tuple(self.low + i * self.step for i in range(n + 1))


def fuse(matrices: list[ProbMatrix], config: EnsembleConfig) -> ProbMatrix:
    """Weighted average of aligned member matrices for one tweet.

    Rows are renormalized after averaging, so the output satisfies the
    row-sum invariant even when member rows are only within the file
    tolerance of 1.
    """
    if not matrices:
        raise ConfigError("fuse needs at least one member matrix")
    if len(matrices) != len(config.weights):
        raise ConfigError(
            f"{len(matrices)} member matrices but {len(config.weights)} weights"
        )
    base = matrices[0]
    for m in matrices[1:]:
        if m.tweet_id != base.tweet_id:
            raise DataValidationError(
                f"member tweet ids differ: {base.tweet_id!r} vs {m.tweet_id!r}"
            )
        if len(m) != len(base):
            raise DataValidationError(
                f"tweet {base.tweet_id!r}: member token counts differ "
                f"({len(base)} vs {len(m)})"
            )
        if m.token_offsets != base.token_offsets:
            raise DataValidationError(
                f"tweet {base.tweet_id!r}: member token offsets differ"
            )
    stack = np.stack([m.probs for m in matrices])
    fused = np.average(stack, axis=0, weights=np.asarray(config.weights, dtype=np.float64))
    if fused.size:
        fused = fused / fused.sum(axis=1, keepdims=True)
    return ProbMatrix(base.tweet_id, base.token_offsets, fused)


def mean_fuse(matrices: list[ProbMatrix]) -> ProbMatrix:
    """Uniform mean of the member rows (all weights equal)."""
    names = tuple(f"member{i}" for i in range(len(matrices)))
    return fuse(matrices, EnsembleConfig(names, (1.0,) * len(matrices)))


def drop_zero_members(config: EnsembleConfig) -> EnsembleConfig:
    """Remove members whose weight is exactly 0; fusion output is unchanged."""
    kept = [(n, w) for n, w in zip(config.member_names, config.weights) if w != 0.0]
    if not kept:
        raise ConfigError("all members have zero weight; nothing left to fuse")
    names, weights = zip(*kept)
    return EnsembleConfig(tuple(names), tuple(weights))


def load_ensemble_config(path) -> EnsembleConfig:
    """Read an ensemble config file: JSON {"members": [str], "weights": [number]}."""
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed ensemble config: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: ensemble config must be a JSON object")
    members = obj.get("members")
    weights = obj.get("weights")
    if (
        not isinstance(members, list)
        or not all(isinstance(m, str) for m in members)
        or not isinstance(weights, list)
    ):
        raise ConfigError(f"{path}: expected keys 'members': [str] and 'weights': [number]")
    try:
        return EnsembleConfig(tuple(members), tuple(float(w) for w in weights))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: bad weights: {exc}") from exc


def save_ensemble_config(path, config: EnsembleConfig) -> None:
    with atomic_write(path) as fh:
        json.dump(
            {"members": list(config.member_names), "weights": list(config.weights)},
            fh,
            ensure_ascii=False,
            indent=2,
        )
        fh.write("\n")


@dataclass(frozen=True)
class SearchResult:
    best: EnsembleConfig
    best_f1: float
    trace: tuple[tuple[tuple[float, ...], float], ...]


def search_weights(
    member_probs: list[list[ProbMatrix]],
    gold: list[SpanAnnotation],
    tokens: list[TokenizedTweet],
    grid: WeightGrid,
    *,
    member_names: tuple[str, ...] | None = None,
    objective: str = "strict",
    exhaustive: bool = False,
) -> SearchResult:
    """Search ensemble weights on a dev set.

    Samples ``grid.iterations`` weight vectors uniformly from the grid
    lattice (all-zero draws are redrawn), evaluates each by fuse, decode,
    span-decode, and entity-level F1 in the requested mode, and returns the
    best (earliest sampled on ties) plus the full (weights, f1) trace.
    Deterministic for a fixed grid seed.

    With ``exhaustive=True`` every lattice point is evaluated in
    lexicographic order instead (test oracle for small member counts);
    iterations and seed are ignored.
    """
    if objective not in ("strict", "overlap"):
        raise ConfigError(f"objective must be 'strict' or 'overlap', got {objective!r}")
    n_members = len(member_probs)
    if n_members < 1:
        raise ConfigError("weight search needs at least one member")
    if member_names is None:
        member_names = tuple(f"member{i}" for i in range(n_members))
    if len(member_names) != n_members:
        raise ConfigError("member_names length does not match member count")

    stacks, tweet_ids, token_lists = _align_members(member_probs, tokens)
    gold_by_tweet: dict[str, list[SpanAnnotation]] = {}
    for ann in gold:
        gold_by_tweet.setdefault(ann.tweet_id, []).append(ann)

    def score(weights: tuple[float, ...]) -> float:
        w = np.asarray(weights, dtype=np.float64)
        w = w / w.sum()
        tp = fp = fn = 0
        for tweet_id, stack, toks in zip(tweet_ids, stacks, token_lists):
            if stack.shape[1]:
                fused = np.tensordot(w, stack, axes=1)
                raw = [CLASS_ORDER[int(c)] for c in np.argmax(fused, axis=1)]
                labels = repair_bio(raw)
            else:
                labels = []
            pred = bio_to_spans(None, toks, labels, tweet_id=tweet_id)
            t, p_, n_ = count_matches(gold_by_tweet.get(tweet_id, []), pred, objective)
            tp += t
            fp += p_
            fn += n_
        return prf(tp, fp, fn)[2]

    values = grid.values()
    trace: list[tuple[tuple[float, ...], float]] = []
    best_weights: tuple[float, ...] | None = None
    best_f1 = -1.0
    if exhaustive:
        candidates = (
            weights
            for weights in itertools.product(values, repeat=n_members)
            if any(w != 0.0 for w in weights)
        )
        for weights in candidates:
            f1 = score(weights)
            trace.append((weights, f1))
            if f1 > best_f1:
                best_f1, best_weights = f1, weights
    else:
        rng = SplitMix64(grid.seed)
        for _ in range(grid.iterations):
            while True:
                weights = tuple(values[rng.below(len(values))] for _ in range(n_members))
                if any(w != 0.0 for w in weights):
                    break
            f1 = score(weights)
            trace.append((weights, f1))
            if f1 > best_f1:
                best_f1, best_weights = f1, weights
    assert best_weights is not None
    return SearchResult(
        best=EnsembleConfig(member_names, best_weights),
        best_f1=best_f1,
        trace=tuple(trace),
    )


def _align_members(
    member_probs: list[list[ProbMatrix]], tokens: list[TokenizedTweet]
) -> tuple[list[np.ndarray], list[str], list[tuple]]:
    """Validate member/token alignment; returns per-tweet member stacks."""
    if not member_probs or not member_probs[0]:
        raise ConfigError("weight search needs non-empty member probability lists")
    reference = member_probs[0]
    ref_ids = [m.tweet_id for m in reference]
    for k, member in enumerate(member_probs[1:], 1):
        if [m.tweet_id for m in member] != ref_ids:
            raise DataValidationError(f"member {k} covers different tweets than member 0")
        for m0, mk in zip(reference, member):
            if m0.token_offsets != mk.token_offsets:
                raise DataValidationError(
                    f"tweet {m0.tweet_id!r}: member {k} token offsets differ from member 0"
                )
    tokens_by_id = {item.tweet_id: item.tokens for item in tokens}
    token_lists = []
    for m in reference:
        if m.tweet_id not in tokens_by_id:
            raise DataValidationError(f"no tokens for tweet {m.tweet_id!r}")
        toks = tokens_by_id[m.tweet_id]
        if tuple((t.start, t.end) for t in toks) != m.token_offsets:
            raise DataValidationError(
                f"tweet {m.tweet_id!r}: probability offsets do not match the tokenization"
            )
        token_lists.append(toks)
    stacks = [
        np.stack([member[i].probs for member in member_probs])
        if len(reference[i])
        else np.zeros((len(member_probs), 0, 3))
        for i in range(len(reference))
    ]
    return stacks, ref_ids, token_lists
