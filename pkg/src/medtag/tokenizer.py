"""Offset-preserving rule-based tweet tokenizer.

Tokenization runs in three passes: split on whitespace runs, peel
punctuation off chunk fronts and backs as single-character tokens, then
force-split any occurrence of a configured custom token (leftmost-longest,
non-overlapping, case-sensitive) out of the remaining pieces. Every token
records its exact character offsets into the original text, counted in
Unicode scalar values, so ``text[token.start:token.end] == token.text``
always holds.

The default custom-token list exists because drug names can hide inside
hashtags and compounds ("#LifeWithAZofranPump"); a token that is never
split apart can never be labeled as a mention.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass
from pathlib import Path

from .errors import DataValidationError
from .fileio import atomic_write, dump_json_line, iter_jsonl

DEFAULT_CUSTOM_TOKENS = (
    "zofran",
    "Zofran",
    "Concerta",
    "shots",
    "nitrous",
    "\U000feb14",
    "/",
)

_ASCII_PUNCTUATION = frozenset(string.punctuation)

_WHITESPACE_RUN = re.compile(r"\S+")


@dataclass(frozen=True)
class Token:
    """A substring of a tweet with exact character offsets."""

    text: str
    start: int
    end: int
    index: int

    def __post_init__(self) -> None:
        if not self.text:
            raise DataValidationError("token text must be non-empty")
        if self.end - self.start != len(self.text):
            raise DataValidationError(
                f"token {self.text!r} length does not match offsets "
                f"({self.start}, {self.end})"
            )


@dataclass(frozen=True)
class TokenizerRules:
    """Immutable tokenizer configuration.

    custom_tokens are case-sensitive strings force-split out of any piece
    they occur in, whether at the front or embedded. prefix_chars and
    suffix_chars are single characters peeled off chunk boundaries.
    """

    custom_tokens: tuple[str, ...]
    prefix_chars: frozenset[str]
    suffix_chars: frozenset[str]

    def __post_init__(self) -> None:
        seen = set()
        for tok in self.custom_tokens:
            if not tok:
                raise DataValidationError("custom tokens must be non-empty")
            if tok in seen:
                raise DataValidationError(f"duplicate custom token {tok!r}")
            seen.add(tok)
        for name, chars in (("prefix", self.prefix_chars), ("suffix", self.suffix_chars)):
            for ch in chars:
                if len(ch) != 1:
                    raise DataValidationError(f"{name} entries must be single characters")


@dataclass(frozen=True)
class TokenizedTweet:
    tweet_id: str
    tokens: tuple[Token, ...]


def default_rules() -> TokenizerRules:
    """Rules used throughout the pipeline unless overridden.

    ASCII punctuation (which includes '#' and '@', so hashtags and user
    mentions split) is peeled from both ends; the custom list covers drug
    names seen embedded in larger tokens plus '/' for compounds like
    "b6/unisom".
    """
    return TokenizerRules(
        custom_tokens=DEFAULT_CUSTOM_TOKENS,
        prefix_chars=_ASCII_PUNCTUATION,
        suffix_chars=_ASCII_PUNCTUATION,
    )


def tokenize(text: str, rules: TokenizerRules | None = None) -> list[Token]:
    """Tokenize text into offset-faithful tokens.

    Total on non-empty input: every non-whitespace character lands in
    exactly one token, tokens never overlap, and offsets always slice back
    to the token text.
    """
    if not text:
        raise DataValidationError("cannot tokenize empty text")
    if rules is None:
        rules = default_rules()
    spans: list[tuple[int, int]] = []
    for match in _WHITESPACE_RUN.finditer(text):
        spans.extend(_split_chunk(text, match.start(), match.end(), rules))
    return [Token(text[s:e], s, e, i) for i, (s, e) in enumerate(spans)]


def _split_chunk(
    text: str, start: int, end: int, rules: TokenizerRules
) -> list[tuple[int, int]]:
    prefixes: list[tuple[int, int]] = []
    while start < end and text[start] in rules.prefix_chars:
        prefixes.append((start, start + 1))
        start += 1
    suffixes: list[tuple[int, int]] = []
    while end > start and text[end - 1] in rules.suffix_chars:
        suffixes.append((end - 1, end))
        end -= 1
    core = _force_splits(text, start, end, rules.custom_tokens)
    return prefixes + core + list(reversed(suffixes))


def _force_splits(
    text: str, start: int, end: int, custom_tokens: tuple[str, ...]
) -> list[tuple[int, int]]:
    """Split out custom-token occurrences, leftmost match first, longest wins."""
    if start >= end:
        return []
    spans: list[tuple[int, int]] = []
    segment_start = start
    i = start
    while i < end:
        best = 0
        for candidate in custom_tokens:
            length = len(candidate)
            if length > best and i + length <= end and text.startswith(candidate, i):
                best = length
        if best:
            if segment_start < i:
                spans.append((segment_start, i))
            spans.append((i, i + best))
            i += best
            segment_start = i
        else:
            i += 1
    if segment_start < end:
        spans.append((segment_start, end))
    return spans


def project_labels_to_subtokens(
    labels: list[str], subtoken_map: list[tuple[int, int]]
) -> list[str]:
    """Expand token-level BIO labels onto subtokens.

    subtoken_map lists (token_index, subtoken_count) pairs covering every
    token exactly once. The first subtoken keeps the token's label; later
    subtokens of an entity token get I-DRUG, later subtokens of an O token
    stay O.
    """
    if len(labels) != len(subtoken_map):
        raise DataValidationError(
            f"labels ({len(labels)}) and subtoken map ({len(subtoken_map)}) lengths differ"
        )
    indices = sorted(idx for idx, _ in subtoken_map)
    if indices != list(range(len(labels))):
        raise DataValidationError("subtoken map must cover every token index exactly once")
    out: list[str] = []
    for token_index, count in subtoken_map:
        if count < 1:
            raise DataValidationError(f"subtoken count for token {token_index} must be >= 1")
        label = labels[token_index]
        continuation = "O" if label == "O" else "I-DRUG"
        out.append(label)
        out.extend([continuation] * (count - 1))
    return out


def tokenize_dataset(tweets, rules: TokenizerRules | None = None) -> list[TokenizedTweet]:
    """Tokenize an iterable of Tweet objects, preserving order."""
    return [TokenizedTweet(t.id, tuple(tokenize(t.text, rules))) for t in tweets]


def load_rules(path: str | Path) -> TokenizerRules:
    """Read a rules override file.

    JSON object with keys ``custom_tokens`` (array of strings) and
    ``prefix_chars`` / ``suffix_chars`` (strings of characters).
    """
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"{path}: malformed rules JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DataValidationError(f"{path}: rules file must hold a JSON object")
    custom = obj.get("custom_tokens", [])
    prefix = obj.get("prefix_chars", "")
    suffix = obj.get("suffix_chars", "")
    if (
        not isinstance(custom, list)
        or not all(isinstance(t, str) for t in custom)
        or not isinstance(prefix, str)
        or not isinstance(suffix, str)
    ):
        raise DataValidationError(
            f"{path}: expected custom_tokens: [str], prefix_chars: str, suffix_chars: str"
        )
    return TokenizerRules(tuple(custom), frozenset(prefix), frozenset(suffix))


def save_rules(path: str | Path, rules: TokenizerRules) -> None:
    with atomic_write(path) as fh:
        json.dump(
            {
                "custom_tokens": list(rules.custom_tokens),
                "prefix_chars": "".join(sorted(rules.prefix_chars)),
                "suffix_chars": "".join(sorted(rules.suffix_chars)),
            },
            fh,
            ensure_ascii=False,
            indent=2,
        )
        fh.write("\n")


def write_tokens_file(path: str | Path, tokenized: list[TokenizedTweet]) -> None:
    """Write per-tweet tokens as JSONL: {"id", "tokens": [{text, start, end}]}."""
    with atomic_write(path) as fh:
        for item in tokenized:
            fh.write(
                dump_json_line(
                    {
                        "id": item.tweet_id,
                        "tokens": [
                            {"text": t.text, "start": t.start, "end": t.end}
                            for t in item.tokens
                        ],
                    }
                )
                + "\n"
            )


def load_tokens_file(path: str | Path) -> list[TokenizedTweet]:
    out: list[TokenizedTweet] = []
    seen: set[str] = set()
    for line_no, obj in iter_jsonl(path):
        tweet_id = obj.get("id")
        raw_tokens = obj.get("tokens")
        if not isinstance(tweet_id, str) or not isinstance(raw_tokens, list):
            raise DataValidationError(f"{path}:{line_no}: expected fields 'id' and 'tokens'")
        if tweet_id in seen:
            raise DataValidationError(f"{path}:{line_no}: duplicate tweet id {tweet_id!r}")
        seen.add(tweet_id)
        tokens: list[Token] = []
        prev_end = -1
        for i, raw in enumerate(raw_tokens):
            try:
                token = Token(raw["text"], int(raw["start"]), int(raw["end"]), i)
            except (KeyError, TypeError, ValueError) as exc:
                raise DataValidationError(
                    f"{path}:{line_no}: token {i} needs text/start/end: {exc}"
                ) from exc
            if token.start < prev_end:
                raise DataValidationError(
                    f"{path}:{line_no}: token offsets overlap or go backwards at index {i}"
                )
            prev_end = token.end
            tokens.append(token)
        out.append(TokenizedTweet(tweet_id, tuple(tokens)))
    return out
