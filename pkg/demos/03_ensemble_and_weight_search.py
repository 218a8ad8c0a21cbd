"""Walkthrough: probability fusion and grid weight search.

Two synthetic members disagree; the search finds weights that favor the
reliable one, scored end to end by strict entity F1.

Run with: python demos/03_ensemble_and_weight_search.py
"""

import random

import numpy as np

from medtag import (
    EnsembleConfig,
    ProbMatrix,
    SpanAnnotation,
    WeightGrid,
    drop_zero_members,
    fuse,
    search_weights,
)
from medtag.tokenizer import Token, TokenizedTweet

rng = random.Random(11)

# A reliable member and a noisy one over the same tokenization.
reliable, noisy, tokens_items, gold = [], [], [], []
for i in range(20):
    tweet_id = f"dev{i:03d}"
    n = rng.randint(3, 7)
    tokens = tuple(Token(f"w{j}", 3 * j, 3 * j + 2, j) for j in range(n))
    offsets = tuple((t.start, t.end) for t in tokens)
    good_rows, bad_rows = np.zeros((n, 3)), np.zeros((n, 3))
    for j in range(n):
        is_entity = rng.random() < 0.25
        if is_entity:
            gold.append(SpanAnnotation(tweet_id, tokens[j].start, tokens[j].end, "xx"))
        good_rows[j] = (0.1, 0.8, 0.1) if is_entity else (0.8, 0.1, 0.1)
        # the noisy member is right only 60% of the time
        right = rng.random() < 0.6
        bad_rows[j] = good_rows[j] if right else (0.1, 0.8, 0.1)
        bad_rows[j] = bad_rows[j] / bad_rows[j].sum()
    reliable.append(ProbMatrix(tweet_id, offsets, good_rows / good_rows.sum(1, keepdims=True)))
    noisy.append(ProbMatrix(tweet_id, offsets, bad_rows))
    tokens_items.append(TokenizedTweet(tweet_id, tokens))

# Fusion is a weighted average normalized by the weight sum, so scaling
# all weights together changes nothing.
config = EnsembleConfig(("reliable", "noisy"), (2.0, 1.0))
fused = fuse([reliable[0], noisy[0]], config)
print("fused rows for the first tweet (weights 2:1):")
print(fused.probs.round(3))
print()

# Random search over the {0.0, 0.1, ..., 2.0} lattice, strict F1 objective.
grid = WeightGrid(low=0.0, high=2.0, step=0.1, iterations=300, seed=99)
result = search_weights(
    [reliable, noisy], gold, tokens_items, grid, member_names=("reliable", "noisy")
)
print(f"best strict F1 {result.best_f1:.3f} with weights {result.best.weights}")
worst = min(f1 for _, f1 in result.trace)
print(f"trace: {len(result.trace)} candidates evaluated, worst F1 {worst:.3f}")
print()

# A member that earns weight 0 can be dropped without changing anything.
zeroed = EnsembleConfig(("reliable", "noisy", "dead"), (1.0, 0.5, 0.0))
print("after dropping zero-weight members:", drop_zero_members(zeroed))
