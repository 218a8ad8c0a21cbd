"""Walkthrough: offset-preserving tokenization and span/label conversion.

Run with: python demos/01_tokenize_and_align.py
"""

from medtag import (
    SpanAnnotation,
    bio_to_spans,
    default_rules,
    repair_bio,
    spans_to_bio,
    tokenize,
)

rules = default_rules()
print("custom forced-split tokens:", rules.custom_tokens)
print()

# Every token knows exactly where it came from, so slicing the original
# text at (start, end) always returns the token text.
for text in ("I took Zofran.", "#LifeWithAZofranPump", "b6/unisom at night"):
    tokens = tokenize(text, rules)
    print(f"{text!r}")
    for t in tokens:
        print(f"  [{t.start:2d},{t.end:2d}) {t.text!r}")
    print()

# Character-offset annotations become per-token BIO labels. A span that
# covers only part of a token is expanded to the whole token, with a
# warning, rather than silently dropped.
text = "vitamin b6 helped, unisom too"
tokens = tokenize(text, rules)
gold = [
    SpanAnnotation("demo", 0, 10, text[0:10]),
    SpanAnnotation("demo", 19, 25, text[19:25]),
]
labels, warnings = spans_to_bio(tokens, gold)
print(f"{text!r}")
print("labels: ", list(zip([t.text for t in tokens], labels)))
print("warnings:", warnings or "none")

# And back: BIO label runs decode to character spans.
recovered = bio_to_spans(text, tokens, labels, tweet_id="demo")
print("recovered spans:", [(s.start, s.end, s.surface) for s in recovered])
assert recovered == gold

# Ill-formed model output (I-DRUG with no opener) is repaired, never fatal.
print("repair:", repair_bio(["I-DRUG", "I-DRUG", "O", "I-DRUG"]))
