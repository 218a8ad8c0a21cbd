"""Entity-level evaluation: strict and overlap precision/recall/F1.

Strict mode pairs a predicted span with a gold span only when both
character offsets are equal; overlap mode pairs them when the character
intervals share at least one position. Pairing is one-to-one with maximum
cardinality, entity types must agree, and counts are aggregated
micro-style across tweets: tp = matched pairs, fp = unmatched predictions,
fn = unmatched gold spans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Dataset, SpanAnnotation
from .errors import ConfigError, DataValidationError
from .fileio import atomic_write, escape_tsv_field

MODES = ("strict", "overlap")

_EXCERPT_WINDOW = 18


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 with the 0-when-undefined convention."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def match_spans(
    gold: list[SpanAnnotation], pred: list[SpanAnnotation], mode: str
) -> list[tuple[int, int]]:
    """Maximum one-to-one matching between gold and pred span lists.

    Returns index pairs into the given lists. Both lists must be internally
    non-overlapping; with that guarantee a sorted two-pointer sweep (per
    entity type) reaches maximum cardinality in both modes.
    """
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    _reject_overlap(gold, "gold")
    _reject_overlap(pred, "pred")
    ids = {s.tweet_id for s in gold} | {s.tweet_id for s in pred}
    if len(ids) > 1:
        raise DataValidationError(f"spans from multiple tweets in one matching: {sorted(ids)}")
    pairs: list[tuple[int, int]] = []
    types = sorted({s.entity_type for s in gold} | {s.entity_type for s in pred})
    for etype in types:
        gi = sorted(
            (i for i, s in enumerate(gold) if s.entity_type == etype),
            key=lambda i: (gold[i].start, gold[i].end),
        )
        pj = sorted(
            (j for j, s in enumerate(pred) if s.entity_type == etype),
            key=lambda j: (pred[j].start, pred[j].end),
        )
        i = j = 0
        while i < len(gi) and j < len(pj):
            g, p = gold[gi[i]], pred[pj[j]]
            if mode == "strict":
                if (g.start, g.end) == (p.start, p.end):
                    pairs.append((gi[i], pj[j]))
                    i += 1
                    j += 1
                elif (g.start, g.end) < (p.start, p.end):
                    i += 1
                else:
                    j += 1
            else:
                if g.start < p.end and p.start < g.end:
                    pairs.append((gi[i], pj[j]))
                    i += 1
                    j += 1
                elif g.end <= p.end:
                    i += 1
                else:
                    j += 1
    return sorted(pairs)


def count_matches(
    gold: list[SpanAnnotation], pred: list[SpanAnnotation], mode: str
) -> tuple[int, int, int]:
    """(tp, fp, fn) for one tweet's span lists."""
    matched = match_spans(gold, pred, mode)
    tp = len(matched)
    return tp, len(pred) - tp, len(gold) - tp


def _reject_overlap(spans: list[SpanAnnotation], which: str) -> None:
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if prev.overlaps(cur):
            raise DataValidationError(
                f"{which} spans overlap: ({prev.start}, {prev.end}) and "
                f"({cur.start}, {cur.end})"
            )


@dataclass(frozen=True)
class TweetMatches:
    """Per-tweet matching detail for one mode."""

    tweet_id: str
    matched: tuple[tuple[SpanAnnotation, SpanAnnotation], ...]
    unmatched_gold: tuple[SpanAnnotation, ...]
    unmatched_pred: tuple[SpanAnnotation, ...]


@dataclass(frozen=True)
class ModeResult:
    tp: int
    fp: int
    fn: int
    per_tweet: tuple[TweetMatches, ...]

    @property
    def precision(self) -> float:
        return prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return prf(self.tp, self.fp, self.fn)[2]


@dataclass(frozen=True)
class EvalReport:
    strict: ModeResult
    overlap: ModeResult
    texts: dict[str, str]

    def mode(self, name: str) -> ModeResult:
        if name == "strict":
            return self.strict
        if name == "overlap":
            return self.overlap
        raise ConfigError(f"unknown mode {name!r}")


def evaluate(
    dataset: Dataset, gold: list[SpanAnnotation], pred: list[SpanAnnotation]
) -> EvalReport:
    """Micro-aggregated strict and overlap scores over a whole dataset."""
    known = {tweet.id for tweet in dataset.tweets}
    for ann in pred:
        if ann.tweet_id not in known:
            raise DataValidationError(f"unknown tweet id {ann.tweet_id!r} in predictions")
    for ann in gold:
        if ann.tweet_id not in known:
            raise DataValidationError(f"unknown tweet id {ann.tweet_id!r} in gold annotations")
    gold_by: dict[str, list[SpanAnnotation]] = {}
    pred_by: dict[str, list[SpanAnnotation]] = {}
    for ann in gold:
        gold_by.setdefault(ann.tweet_id, []).append(ann)
    for ann in pred:
        pred_by.setdefault(ann.tweet_id, []).append(ann)
    tweet_ids = sorted(set(gold_by) | set(pred_by))
    texts = dataset.text_by_id()

    results: dict[str, ModeResult] = {}
    for mode in MODES:
        tp = fp = fn = 0
        details: list[TweetMatches] = []
        for tweet_id in tweet_ids:
            g = sorted(gold_by.get(tweet_id, []), key=lambda s: (s.start, s.end))
            p = sorted(pred_by.get(tweet_id, []), key=lambda s: (s.start, s.end))
            pairs = match_spans(g, p, mode)
            gm = {i for i, _ in pairs}
            pm = {j for _, j in pairs}
            details.append(
                TweetMatches(
                    tweet_id=tweet_id,
                    matched=tuple((g[i], p[j]) for i, j in pairs),
                    unmatched_gold=tuple(s for i, s in enumerate(g) if i not in gm),
                    unmatched_pred=tuple(s for j, s in enumerate(p) if j not in pm),
                )
            )
            tp += len(pairs)
            fp += len(p) - len(pairs)
            fn += len(g) - len(pairs)
        results[mode] = ModeResult(tp=tp, fp=fp, fn=fn, per_tweet=tuple(details))
    report_texts = {tid: texts[tid] for tid in tweet_ids}
    return EvalReport(strict=results["strict"], overlap=results["overlap"], texts=report_texts)


def _span_dict(span: SpanAnnotation) -> dict:
    return {
        "tweet_id": span.tweet_id,
        "start": span.start,
        "end": span.end,
        "surface": span.surface,
        "entity_type": span.entity_type,
    }


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready dict; scores at full float precision."""
    out: dict = {}
    for mode in MODES:
        result = report.mode(mode)
        out[mode] = {
            "tp": result.tp,
            "fp": result.fp,
            "fn": result.fn,
            "precision": result.precision,
            "recall": result.recall,
            "f1": result.f1,
            "per_tweet": [
                {
                    "tweet_id": d.tweet_id,
                    "matched": [
                        {"gold": _span_dict(g), "pred": _span_dict(p)} for g, p in d.matched
                    ],
                    "unmatched_gold": [_span_dict(s) for s in d.unmatched_gold],
                    "unmatched_pred": [_span_dict(s) for s in d.unmatched_pred],
                }
                for d in result.per_tweet
            ],
        }
    return out


def write_report_json(path: str | Path, report: EvalReport) -> None:
    with atomic_write(path) as fh:
        json.dump(report_to_dict(report), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def render_report_text(report: EvalReport) -> str:
    """Aligned human-readable summary, three decimals, round half to even."""
    lines = [f"{'mode':<9} {'precision':>9} {'recall':>9} {'f1':>9} {'tp':>6} {'fp':>6} {'fn':>6}"]
    for mode in MODES:
        r = report.mode(mode)
        lines.append(
            f"{mode:<9} {r.precision:>9.3f} {r.recall:>9.3f} {r.f1:>9.3f} "
            f"{r.tp:>6d} {r.fp:>6d} {r.fn:>6d}"
        )
    return "\n".join(lines) + "\n"


def _excerpt(text: str, start: int, end: int) -> str:
    lo = max(0, start - _EXCERPT_WINDOW)
    hi = min(len(text), end + _EXCERPT_WINDOW)
    prefix = "..." if lo > 0 else ""
    suffix = "..." if hi < len(text) else ""
    return f"{prefix}{text[lo:hi]}{suffix}"


def diff_report(report: EvalReport, path: str | Path) -> None:
    """Write every false positive and false negative as a TSV.

    Columns: mode, kind (FP/FN), tweet_id, start, end, surface, excerpt.
    Sorted by tweet id, then offsets. Perfect predictions yield a file
    with only the header line.
    """
    rows: list[tuple[str, str, str, int, int, str, str]] = []
    for mode in MODES:
        for detail in report.mode(mode).per_tweet:
            text = report.texts.get(detail.tweet_id, "")
            for span in detail.unmatched_pred:
                rows.append(
                    (
                        mode,
                        "FP",
                        span.tweet_id,
                        span.start,
                        span.end,
                        span.surface or text[span.start : span.end],
                        _excerpt(text, span.start, span.end),
                    )
                )
            for span in detail.unmatched_gold:
                rows.append(
                    (
                        mode,
                        "FN",
                        span.tweet_id,
                        span.start,
                        span.end,
                        span.surface,
                        _excerpt(text, span.start, span.end),
                    )
                )
    rows.sort(key=lambda r: (r[0], r[2], r[3], r[4], r[1]))
    with atomic_write(path) as fh:
        fh.write("mode\tkind\ttweet_id\tstart\tend\tsurface\texcerpt\n")
        for mode, kind, tweet_id, start, end, surface, excerpt in rows:
            fh.write(
                "\t".join(
                    (
                        mode,
                        kind,
                        tweet_id,
                        str(start),
                        str(end),
                        escape_tsv_field(surface),
                        escape_tsv_field(excerpt),
                    )
                )
                + "\n"
            )
