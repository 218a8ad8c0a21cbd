"""Turn tokenized tweets plus a model backend into a probability file."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import CANONICAL_LABELS, load_backend
from .errors import BridgeError
from .io import read_tokens_file, write_probs_file


@dataclass(frozen=True)
class BridgeConfig:
    model: str
    tokens_path: str
    out_path: str
    max_seq_len: int = 512
    device: str | None = None

    def __post_init__(self) -> None:
        if self.max_seq_len < 1:
            raise BridgeError(f"max_seq_len must be >= 1, got {self.max_seq_len}")


def export_probs(config: BridgeConfig) -> int:
    """Run the model over every tweet and write a medtag-probs-v1 file.

    Each token contributes the class distribution of its first subtoken,
    remapped to the canonical [O, B-DRUG, I-DRUG] column order and
    renormalized to sum to 1. Returns the number of tweets written. A
    tweet whose subtokens exceed ``max_seq_len`` aborts the export; no
    output file is left behind.
    """
    backend = load_backend(config.model, config.device)
    remap = [backend.label_order.index(label) for label in CANONICAL_LABELS]
    tweets = read_tokens_file(config.tokens_path)
    output = []
    for tweet in tweets:
        texts = [token.text for token in tweet.tokens]
        distributions = backend.token_distributions(tweet.tweet_id, texts, config.max_seq_len)
        if distributions.shape != (len(texts), 3):
            raise BridgeError(
                f"backend returned shape {distributions.shape} for "
                f"{len(texts)} tokens of tweet {tweet.tweet_id!r}"
            )
        rows = np.asarray(distributions, dtype=np.float64)[:, remap]
        if rows.size:
            sums = rows.sum(axis=1, keepdims=True)
            if (sums <= 0).any() or not np.isfinite(rows).all():
                raise BridgeError(
                    f"backend produced non-normalizable rows for tweet {tweet.tweet_id!r}"
                )
            rows = rows / sums
        output.append((tweet, [[float(x) for x in row] for row in rows]))
    write_probs_file(config.out_path, output)
    return len(output)
