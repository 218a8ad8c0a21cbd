"""Tweet datasets: loading, validation, serialization, and fold splitting.

File formats
------------
Tweets           UTF-8 JSONL, one object ``{"id": str, "text": str}`` per line.
Annotations      UTF-8 TSV, columns ``tweet_id  start  end  surface  entity_type``,
                 no header. ``start``/``end`` are character offsets counted in
                 Unicode scalar values, start inclusive, end exclusive. Surfaces
                 containing tabs, line breaks, or backslashes are escaped as
                 ``\\t \\n \\r \\\\``.
FoldAssignment   TSV ``tweet_id  fold_index`` preceded by a comment line
                 ``# seed=<seed> k=<k>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataValidationError
from .fileio import atomic_write, dump_json_line, escape_tsv_field, iter_jsonl, unescape_tsv_field
from .rng import SplitMix64

ENTITY_TYPE_DRUG = "drug"


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise DataValidationError("tweet id must be a non-empty string")
        if len(self.text) < 1:
            raise DataValidationError(f"tweet {self.id!r} has empty text")


@dataclass(frozen=True)
class SpanAnnotation:
    """Character-offset entity mention within one tweet."""

    tweet_id: str
    start: int
    end: int
    surface: str
    entity_type: str = ENTITY_TYPE_DRUG

    def __post_init__(self) -> None:
        if self.start < 0 or self.start >= self.end:
            raise DataValidationError(
                f"span ({self.start}, {self.end}) on tweet {self.tweet_id!r} "
                "must satisfy 0 <= start < end"
            )

    def overlaps(self, other: "SpanAnnotation") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Dataset:
    """An ordered tweet collection plus its span annotations."""

    tweets: tuple[Tweet, ...]
    annotations: tuple[SpanAnnotation, ...] = ()

    def __post_init__(self) -> None:
        ids = set()
        for tweet in self.tweets:
            if tweet.id in ids:
                raise DataValidationError(f"duplicate tweet id {tweet.id!r}")
            ids.add(tweet.id)
        for ann in self.annotations:
            if ann.tweet_id not in ids:
                raise DataValidationError(
                    f"annotation references unknown tweet id {ann.tweet_id!r}"
                )

    def by_id(self, tweet_id: str) -> Tweet:
        for tweet in self.tweets:
            if tweet.id == tweet_id:
                return tweet
        raise KeyError(tweet_id)

    def text_by_id(self) -> dict[str, str]:
        return {tweet.id: tweet.text for tweet in self.tweets}

    def annotations_for(self, tweet_id: str) -> list[SpanAnnotation]:
        return [a for a in self.annotations if a.tweet_id == tweet_id]

    def __len__(self) -> int:
        return len(self.tweets)


@dataclass(frozen=True)
class FoldAssignment:
    """Deterministic k-fold partition of a dataset's tweet ids."""

    seed: int
    k: int
    assignment: dict[str, int] = field(compare=False)

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(tid for tid, f in self.assignment.items() if f == fold)


def load_tweets(path: str | Path) -> list[Tweet]:
    """Read a tweets JSONL file, preserving file order."""
    tweets: list[Tweet] = []
    seen: dict[str, int] = {}
    for line_no, obj in iter_jsonl(path):
        tweet_id = obj.get("id")
        text = obj.get("text")
        if not isinstance(tweet_id, str) or not isinstance(text, str):
            raise DataValidationError(
                f"{path}:{line_no}: each line needs string fields 'id' and 'text'"
            )
        if not tweet_id:
            raise DataValidationError(f"{path}:{line_no}: empty tweet id")
        if not text:
            raise DataValidationError(f"{path}:{line_no}: tweet {tweet_id!r} has empty text")
        if tweet_id in seen:
            raise DataValidationError(
                f"{path}:{line_no}: duplicate tweet id {tweet_id!r} "
                f"(first seen on line {seen[tweet_id]})"
            )
        seen[tweet_id] = line_no
        tweets.append(Tweet(tweet_id, text))
    return tweets


def save_tweets(path: str | Path, tweets: list[Tweet]) -> None:
    with atomic_write(path) as fh:
        for tweet in tweets:
            fh.write(dump_json_line({"id": tweet.id, "text": tweet.text}) + "\n")


def read_annotations(path: str | Path) -> list[SpanAnnotation]:
    """Parse an annotations TSV without a dataset (no surface/bounds check).

    Per-tweet overlap is still rejected. Use :func:`load_annotations` when the
    tweets are available for full validation.
    """
    annotations: list[SpanAnnotation] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataValidationError(
                    f"{path}:{line_no}: expected 5 tab-separated columns, got {len(parts)}"
                )
            tweet_id, start_s, end_s, surface, entity_type = parts
            try:
                start, end = int(start_s), int(end_s)
            except ValueError as exc:
                raise DataValidationError(
                    f"{path}:{line_no}: start/end must be integers"
                ) from exc
            if start >= end or start < 0:
                raise DataValidationError(
                    f"{path}:{line_no}: invalid span ({start}, {end}), need 0 <= start < end"
                )
            annotations.append(
                SpanAnnotation(tweet_id, start, end, unescape_tsv_field(surface), entity_type)
            )
    _check_no_overlap(annotations, str(path))
    return annotations


def load_annotations(path: str | Path, dataset: Dataset) -> list[SpanAnnotation]:
    """Read an annotations TSV and validate every span against its tweet."""
    annotations = read_annotations(path)
    texts = dataset.text_by_id()
    for ann in annotations:
        if ann.tweet_id not in texts:
            raise DataValidationError(f"{path}: unknown tweet id {ann.tweet_id!r}")
        text = texts[ann.tweet_id]
        if ann.end > len(text):
            raise DataValidationError(
                f"{path}: span ({ann.start}, {ann.end}) exceeds length {len(text)} "
                f"of tweet {ann.tweet_id!r}"
            )
        actual = text[ann.start : ann.end]
        if actual != ann.surface:
            raise DataValidationError(
                f"{path}: surface mismatch on tweet {ann.tweet_id!r} at "
                f"({ann.start}, {ann.end}): expected {ann.surface!r}, text has {actual!r}"
            )
    return annotations


def save_annotations(path: str | Path, annotations: list[SpanAnnotation]) -> None:
    with atomic_write(path) as fh:
        for ann in annotations:
            fh.write(
                "\t".join(
                    (
                        ann.tweet_id,
                        str(ann.start),
                        str(ann.end),
                        escape_tsv_field(ann.surface),
                        ann.entity_type,
                    )
                )
                + "\n"
            )


def _check_no_overlap(annotations: list[SpanAnnotation], source: str) -> None:
    by_tweet: dict[str, list[SpanAnnotation]] = {}
    for ann in annotations:
        by_tweet.setdefault(ann.tweet_id, []).append(ann)
    for tweet_id, spans in by_tweet.items():
        spans = sorted(spans, key=lambda s: (s.start, s.end))
        for prev, cur in zip(spans, spans[1:]):
            if prev.overlaps(cur):
                raise DataValidationError(
                    f"{source}: overlapping spans ({prev.start}, {prev.end}) and "
                    f"({cur.start}, {cur.end}) on tweet {tweet_id!r}"
                )


def split_folds(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Partition tweet ids into k folds of near-equal size.

    Ids are sorted lexicographically, shuffled with SplitMix64(seed), and
    dealt round-robin, so the assignment is a pure function of
    (seed, k, id set) and fold sizes differ by at most one.
    """
    n = len(dataset.tweets)
    if k < 2 or k > n:
        raise ConfigError(f"fold count k={k} must satisfy 2 <= k <= {n} (number of tweets)")
    ids = sorted(tweet.id for tweet in dataset.tweets)
    SplitMix64(seed).shuffle(ids)
    assignment = {tweet_id: i % k for i, tweet_id in enumerate(ids)}
    return FoldAssignment(seed=seed, k=k, assignment=assignment)


def fold_views(dataset: Dataset, fa: FoldAssignment, held_out: int) -> tuple[Dataset, Dataset]:
    """Split a dataset into (train, validation) views for one held-out fold."""
    if not 0 <= held_out < fa.k:
        raise ConfigError(f"held_out={held_out} out of range [0, {fa.k})")
    val_ids = {tid for tid, f in fa.assignment.items() if f == held_out}
    train_tweets = tuple(t for t in dataset.tweets if t.id not in val_ids)
    val_tweets = tuple(t for t in dataset.tweets if t.id in val_ids)
    train_anns = tuple(a for a in dataset.annotations if a.tweet_id not in val_ids)
    val_anns = tuple(a for a in dataset.annotations if a.tweet_id in val_ids)
    return Dataset(train_tweets, train_anns), Dataset(val_tweets, val_anns)


def save_fold_assignment(path: str | Path, fa: FoldAssignment) -> None:
    with atomic_write(path) as fh:
        fh.write(f"# seed={fa.seed} k={fa.k}\n")
        for tweet_id in sorted(fa.assignment):
            fh.write(f"{tweet_id}\t{fa.assignment[tweet_id]}\n")


def load_fold_assignment(path: str | Path) -> FoldAssignment:
    seed = k = None
    assignment: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                for part in line.lstrip("# ").split():
                    if part.startswith("seed="):
                        seed = int(part[5:])
                    elif part.startswith("k="):
                        k = int(part[2:])
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataValidationError(f"{path}:{line_no}: expected 'tweet_id<TAB>fold'")
            assignment[parts[0]] = int(parts[1])
    if seed is None or k is None:
        raise DataValidationError(f"{path}: missing '# seed=... k=...' header")
    for tweet_id, fold in assignment.items():
        if not 0 <= fold < k:
            raise DataValidationError(
                f"{path}: fold {fold} for tweet {tweet_id!r} out of range [0, {k})"
            )
    return FoldAssignment(seed=seed, k=k, assignment=assignment)
