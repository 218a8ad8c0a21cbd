"""Token input and probability output files.

This module deliberately reimplements the two wire formats it shares with
the main toolkit instead of importing it: the bridge talks to the toolkit
only through files.

Input, tokens JSONL: one ``{"id": str, "tokens": [{"text", "start",
"end"}]}`` object per line.

Output, ``medtag-probs-v1`` JSONL: header line ``#schema=medtag-probs-v1``
followed by one ``{"id": str, "tokens": [{"start", "end"}], "probs":
[[pO, pB, pI], ...]}`` object per tweet; class order [O, B-DRUG, I-DRUG];
rows sum to 1.
"""

from __future__ import annotations

import json
import os
import tempfile
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import IO

from .errors import DataError

PROBS_SCHEMA = "medtag-probs-v1"


@dataclass(frozen=True)
class InputToken:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class InputTweet:
    tweet_id: str
    tokens: tuple[InputToken, ...]


@contextmanager
def atomic_write(path: str | Path) -> Iterator[IO[str]]:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def read_tokens_file(path: str | Path) -> list[InputTweet]:
    tweets: list[InputTweet] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: malformed JSON: {exc}") from exc
            tweet_id = obj.get("id")
            raw_tokens = obj.get("tokens")
            if not isinstance(tweet_id, str) or not isinstance(raw_tokens, list):
                raise DataError(f"{path}:{line_no}: expected fields 'id' and 'tokens'")
            if tweet_id in seen:
                raise DataError(f"{path}:{line_no}: duplicate tweet id {tweet_id!r}")
            seen.add(tweet_id)
            tokens = []
            for i, raw in enumerate(raw_tokens):
                try:
                    token = InputToken(raw["text"], int(raw["start"]), int(raw["end"]))
                except (KeyError, TypeError, ValueError) as exc:
                    raise DataError(
                        f"{path}:{line_no}: token {i} needs text/start/end: {exc}"
                    ) from exc
                if not token.text or token.start >= token.end:
                    raise DataError(f"{path}:{line_no}: token {i} is empty or inverted")
                tokens.append(token)
            tweets.append(InputTweet(tweet_id, tuple(tokens)))
    return tweets


def write_probs_file(path: str | Path, rows_by_tweet: list[tuple[InputTweet, list[list[float]]]]) -> None:
    with atomic_write(path) as fh:
        fh.write(f"#schema={PROBS_SCHEMA}\n")
        for tweet, rows in rows_by_tweet:
            fh.write(
                json.dumps(
                    {
                        "id": tweet.tweet_id,
                        "tokens": [{"start": t.start, "end": t.end} for t in tweet.tokens],
                        "probs": rows,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
