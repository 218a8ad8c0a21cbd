"""Conversion between character-span annotations and per-token BIO labels.

Three labels exist: B-DRUG opens a mention, I-DRUG continues it, O is
everything else. The canonical class order for probability vectors and
tie-breaking is [O, B-DRUG, I-DRUG] = indices [0, 1, 2].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import ENTITY_TYPE_DRUG, SpanAnnotation
from .errors import DataValidationError
from .fileio import atomic_write, dump_json_line, iter_jsonl
from .tokenizer import Token

O = "O"
B_DRUG = "B-DRUG"
I_DRUG = "I-DRUG"
CLASS_ORDER = (O, B_DRUG, I_DRUG)
LABEL_TO_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}


@dataclass(frozen=True)
class LabeledTweet:
    tweet_id: str
    tokens: tuple[Token, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.labels):
            raise DataValidationError(
                f"tweet {self.tweet_id!r}: {len(self.tokens)} tokens but "
                f"{len(self.labels)} labels"
            )
        for label in self.labels:
            if label not in LABEL_TO_INDEX:
                raise DataValidationError(f"unknown label {label!r}")


def spans_to_bio(
    tokens: list[Token] | tuple[Token, ...],
    spans: list[SpanAnnotation],
) -> tuple[list[str], list[str]]:
    """Convert character spans to token labels.

    A token belongs to a span if they share at least one character. The
    first token of each span gets B-DRUG, later ones I-DRUG. A span
    boundary strictly inside a token pulls the whole token into the
    entity and emits an expansion warning rather than dropping the
    mention.

    Returns (labels, warnings).
    """
    tweet_ids = {s.tweet_id for s in spans}
    if len(tweet_ids) > 1:
        raise DataValidationError(f"spans from multiple tweets: {sorted(tweet_ids)}")
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if prev.overlaps(cur):
            raise DataValidationError(
                f"overlapping spans ({prev.start}, {prev.end}) and ({cur.start}, {cur.end})"
            )
    labels = [O] * len(tokens)
    warnings: list[str] = []
    for span in ordered:
        members = [i for i, t in enumerate(tokens) if t.start < span.end and span.start < t.end]
        if not members:
            warnings.append(
                f"span ({span.start}, {span.end}) {span.surface!r} overlaps no token; dropped"
            )
            continue
        first, last = members[0], members[-1]
        if tokens[first].start < span.start or tokens[last].end > span.end:
            warnings.append(
                f"span ({span.start}, {span.end}) {span.surface!r} expanded to token "
                f"boundaries ({tokens[first].start}, {tokens[last].end})"
            )
        for position, i in enumerate(members):
            if labels[i] != O and position == 0:
                warnings.append(
                    f"token {tokens[i].text!r} at ({tokens[i].start}, {tokens[i].end}) "
                    "claimed by two spans after expansion"
                )
            labels[i] = B_DRUG if position == 0 else I_DRUG
    return labels, warnings


def repair_bio(labels: list[str] | tuple[str, ...]) -> list[str]:
    """Rewrite any I-DRUG that opens a sequence or follows O into B-DRUG.

    Idempotent; output always decodes cleanly.
    """
    out = list(labels)
    previous = O
    for i, label in enumerate(out):
        if label == I_DRUG and previous == O:
            out[i] = B_DRUG
        previous = out[i]
    return out


def bio_to_spans(
    tweet_text: str | None,
    tokens: list[Token] | tuple[Token, ...],
    labels: list[str] | tuple[str, ...],
    *,
    tweet_id: str = "",
    entity_type: str = ENTITY_TYPE_DRUG,
) -> list[SpanAnnotation]:
    """Decode BIO labels into character spans.

    Each maximal B-DRUG (I-DRUG)* run becomes one span from the first
    token's start to the last token's end. Labels are repaired first, so
    ill-formed model output never raises. When ``tweet_text`` is None the
    surface field is left empty (offset-only decoding, e.g. during weight
    search); matching never reads surfaces.
    """
    if len(tokens) != len(labels):
        raise DataValidationError(
            f"{len(tokens)} tokens but {len(labels)} labels for tweet {tweet_id!r}"
        )
    repaired = repair_bio(labels)
    spans: list[SpanAnnotation] = []
    i = 0
    while i < len(tokens):
        if repaired[i] == B_DRUG:
            j = i + 1
            while j < len(tokens) and repaired[j] == I_DRUG:
                j += 1
            start, end = tokens[i].start, tokens[j - 1].end
            surface = tweet_text[start:end] if tweet_text is not None else ""
            spans.append(SpanAnnotation(tweet_id, start, end, surface, entity_type))
            i = j
        else:
            i += 1
    return spans


def write_labeled_file(path: str | Path, labeled: list[LabeledTweet]) -> None:
    """Write labeled tweets as JSONL: {"id", "tokens": [...], "labels": [...]}."""
    with atomic_write(path) as fh:
        for item in labeled:
            fh.write(
                dump_json_line(
                    {
                        "id": item.tweet_id,
                        "tokens": [
                            {"text": t.text, "start": t.start, "end": t.end}
                            for t in item.tokens
                        ],
                        "labels": list(item.labels),
                    }
                )
                + "\n"
            )


def load_labeled_file(path: str | Path) -> list[LabeledTweet]:
    out: list[LabeledTweet] = []
    for line_no, obj in iter_jsonl(path):
        tweet_id = obj.get("id")
        raw_tokens = obj.get("tokens")
        raw_labels = obj.get("labels")
        if (
            not isinstance(tweet_id, str)
            or not isinstance(raw_tokens, list)
            or not isinstance(raw_labels, list)
        ):
            raise DataValidationError(
                f"{path}:{line_no}: expected fields 'id', 'tokens', 'labels'"
            )
        try:
            tokens = tuple(
                Token(raw["text"], int(raw["start"]), int(raw["end"]), i)
                for i, raw in enumerate(raw_tokens)
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataValidationError(f"{path}:{line_no}: bad token record: {exc}") from exc
        try:
            out.append(LabeledTweet(tweet_id, tokens, tuple(raw_labels)))
        except DataValidationError as exc:
            raise DataValidationError(f"{path}:{line_no}: {exc}") from exc
    return out
