"""Walkthrough: train the baseline tagger and inspect its probabilities.

Builds a small synthetic corpus (drug names planted in filler text at
known offsets), trains the averaged perceptron, and decodes one tweet.

Run with: python demos/02_train_baseline_tagger.py
"""

import random

from medtag import (
    Dataset,
    LabeledTweet,
    SpanAnnotation,
    TrainConfig,
    Tweet,
    decode,
    evaluate,
    predict_probs,
    render_report_text,
    spans_to_bio,
    tokenize,
    train_baseline,
    bio_to_spans,
)

DRUGS = ["efexat", "brufexol", "zopiclan", "metforal", "juvexa", "ketorin"]
FILLER = "took my dose again this morning and felt much better after".split()


def make_corpus(n, seed):
    rng = random.Random(seed)
    tweets, annotations = [], []
    for i in range(n):
        words = [rng.choice(FILLER) for _ in range(rng.randint(3, 8))]
        if rng.random() < 0.8:
            words.insert(rng.randint(0, len(words)), rng.choice(DRUGS))
        text = " ".join(words)
        tweet_id = f"demo{i:03d}"
        tweets.append(Tweet(tweet_id, text))
        pos = 0
        for word in words:
            if word in DRUGS:
                annotations.append(SpanAnnotation(tweet_id, pos, pos + len(word), word))
            pos += len(word) + 1
    return Dataset(tuple(tweets), tuple(annotations))


def label(dataset):
    out = []
    for tweet in dataset.tweets:
        tokens = tuple(tokenize(tweet.text))
        labels, _ = spans_to_bio(tokens, dataset.annotations_for(tweet.id))
        out.append(LabeledTweet(tweet.id, tokens, tuple(labels)))
    return out


corpus = make_corpus(200, seed=7)
labeled = label(corpus)
train, dev, test = labeled[:140], labeled[140:170], labeled[170:]

model = train_baseline(train, dev, TrainConfig(epochs=5, learning_rate=1.0, seed=42))
print(f"kept epoch {model.best_epoch} with dev token F1 {model.dev_f1:.3f}")
print(f"gazetteer learned from training data: {sorted(model.gazetteer)}")
print()

# Per-token class probabilities for one tweet, then argmax decoding.
item = test[0]
matrix = predict_probs(model, item.tokens, tweet_id=item.tweet_id)
labels = decode(matrix)
print(corpus.by_id(item.tweet_id).text)
for token, row, lab in zip(item.tokens, matrix.probs, labels):
    print(f"  {token.text:>12}  O={row[0]:.3f} B={row[1]:.3f} I={row[2]:.3f}  -> {lab}")
print()

# Entity-level scores over the whole test slice.
test_ids = {item.tweet_id for item in test}
test_dataset = Dataset(
    tuple(t for t in corpus.tweets if t.id in test_ids),
    tuple(a for a in corpus.annotations if a.tweet_id in test_ids),
)
pred = []
for item in test:
    matrix = predict_probs(model, item.tokens, tweet_id=item.tweet_id)
    pred.extend(
        bio_to_spans(
            test_dataset.by_id(item.tweet_id).text,
            item.tokens,
            decode(matrix),
            tweet_id=item.tweet_id,
        )
    )
report = evaluate(test_dataset, list(test_dataset.annotations), pred)
print(render_report_text(report))
