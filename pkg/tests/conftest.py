"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import random

import pytest

from medtag import Dataset, SpanAnnotation, Tweet

# Disjoint vocabularies: no filler word contains a drug name or a default
# custom token as a substring, so tokenization stays trivially aligned.
DRUG_NAMES = [
    "abilifan", "brufexol", "cetrizan", "dolmexin", "efexat", "fluvoxil",
    "gabatran", "hydrocodal", "ibumetin", "juvexa", "ketorin", "lamotrex",
    "metforal", "naproxat", "olanzet", "paroxil", "quetiax", "ramipren",
    "sertradol", "topamar", "ultracet", "venlafax", "warfax", "xanorol",
    "yohimbal", "zopiclan", "zyrtecol", "melatonar", "omeprazil", "tramadex",
]

FILLER_WORDS = [
    "today", "took", "my", "for", "the", "and", "morning", "nausea", "again",
    "really", "still", "feeling", "better", "worse", "doctor", "said",
    "start", "taking", "after", "before", "lunch", "dinner", "sleep",
    "night", "week", "pregnancy", "baby", "finally", "hope", "helps",
    "works", "tired", "sick", "headache", "since", "hours", "days", "dose",
    "half", "whole", "first", "second", "third", "need", "much", "little",
    "about", "maybe", "never", "always", "sometimes", "pretty", "awful",
    "great", "nothing", "everything", "anyone", "else", "tried", "hate",
]

MODIFIER_WORDS = ["forte", "plus", "retard"]


def build_synthetic_corpus(
    n_tweets: int,
    seed: int,
    p_entity: float = 0.7,
    two_token_rate: float = 0.15,
    id_prefix: str = "s",
) -> Dataset:
    """Space-separated synthetic tweets with drug mentions at known offsets."""
    rng = random.Random(seed)
    tweets: list[Tweet] = []
    annotations: list[SpanAnnotation] = []
    for i in range(n_tweets):
        tweet_id = f"{id_prefix}{i:05d}"
        items: list[tuple[bool, str]] = [
            (False, rng.choice(FILLER_WORDS)) for _ in range(rng.randint(3, 12))
        ]
        if rng.random() < p_entity:
            for _ in range(rng.randint(1, 2)):
                name = rng.choice(DRUG_NAMES)
                if rng.random() < two_token_rate:
                    name = f"{name} {rng.choice(MODIFIER_WORDS)}"
                items.insert(rng.randint(0, len(items)), (True, name))
        parts: list[str] = []
        pos = 0
        spans: list[tuple[int, int, str]] = []
        for is_drug, word in items:
            if parts:
                pos += 1
            start = pos
            parts.append(word)
            pos += len(word)
            if is_drug:
                spans.append((start, pos, word))
        text = " ".join(parts)
        tweets.append(Tweet(tweet_id, text))
        annotations.extend(SpanAnnotation(tweet_id, s, e, w) for s, e, w in spans)
    return Dataset(tuple(tweets), tuple(annotations))


def random_disjoint_spans(
    rng: random.Random, tweet_id: str, text: str, max_spans: int
) -> list[SpanAnnotation]:
    """Up to max_spans non-overlapping spans at random offsets."""
    n = rng.randint(0, max_spans)
    if n == 0:
        return []
    points = sorted(rng.sample(range(len(text) + 1), 2 * n))
    return [
        SpanAnnotation(tweet_id, points[2 * i], points[2 * i + 1], text[points[2 * i] : points[2 * i + 1]])
        for i in range(n)
    ]


@pytest.fixture
def make_corpus():
    return build_synthetic_corpus
