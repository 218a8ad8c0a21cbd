import functools
import json
import random

import pytest

from medtag import (
    Dataset,
    DataValidationError,
    SpanAnnotation,
    Tweet,
    diff_report,
    evaluate,
    match_spans,
    render_report_text,
)
from medtag.evaluation import count_matches, prf, report_to_dict, write_report_json

from conftest import random_disjoint_spans


def spans(tweet_id, *pairs):
    return [SpanAnnotation(tweet_id, s, e, "x" * (e - s)) for s, e in pairs]


def brute_force_max_matching(gold, pred, mode):
    """Independent oracle: exhaustive maximum bipartite matching size."""

    def compatible(g, p):
        if g.entity_type != p.entity_type:
            return False
        if mode == "strict":
            return (g.start, g.end) == (p.start, p.end)
        return g.start < p.end and p.start < g.end

    @functools.lru_cache(maxsize=None)
    def go(i, used):
        if i == len(gold):
            return 0
        best = go(i + 1, used)
        for j in range(len(pred)):
            if not used >> j & 1 and compatible(gold[i], pred[j]):
                best = max(best, 1 + go(i + 1, used | (1 << j)))
        return best

    return go(0, 0)


class TestMatchSpans:
    def test_exact_match_both_modes(self):
        g, p = spans("t", (5, 11)), spans("t", (5, 11))
        assert len(match_spans(g, p, "strict")) == 1
        assert len(match_spans(g, p, "overlap")) == 1

    def test_shifted_match_overlap_only(self):
        g, p = spans("t", (5, 11)), spans("t", (7, 14))
        assert match_spans(g, p, "strict") == []
        assert len(match_spans(g, p, "overlap")) == 1

    def test_one_to_one_constraint(self):
        g = spans("t", (0, 4), (10, 14))
        p = spans("t", (3, 11))
        assert len(match_spans(g, p, "overlap")) == 1
        assert match_spans(g, p, "strict") == []

    def test_entity_type_must_agree(self):
        g = [SpanAnnotation("t", 0, 4, "xxxx", "drug")]
        p = [SpanAnnotation("t", 0, 4, "xxxx", "disease")]
        assert match_spans(g, p, "strict") == []
        assert match_spans(g, p, "overlap") == []

    def test_overlapping_input_rejected(self):
        bad = [SpanAnnotation("t", 0, 4, "xxxx"), SpanAnnotation("t", 2, 6, "xxxx")]
        with pytest.raises(DataValidationError, match="overlap"):
            match_spans(bad, [], "strict")

    def test_bad_mode(self):
        from medtag.errors import ConfigError

        with pytest.raises(ConfigError):
            match_spans([], [], "fuzzy")

    def test_matches_brute_force_fuzz(self):
        rng = random.Random(1234)
        text = "x" * 40
        for _ in range(400):
            g = random_disjoint_spans(rng, "t", text, 6)
            p = random_disjoint_spans(rng, "t", text, 6)
            for mode in ("strict", "overlap"):
                assert len(match_spans(g, p, mode)) == brute_force_max_matching(
                    tuple(g), tuple(p), mode
                )

    def test_overlap_dominates_strict(self):
        rng = random.Random(77)
        text = "x" * 40
        for _ in range(300):
            g = random_disjoint_spans(rng, "t", text, 6)
            p = random_disjoint_spans(rng, "t", text, 6)
            assert len(match_spans(g, p, "overlap")) >= len(match_spans(g, p, "strict"))

    def test_symmetry_swapping_lists(self):
        rng = random.Random(88)
        text = "x" * 40
        for _ in range(300):
            g = random_disjoint_spans(rng, "t", text, 6)
            p = random_disjoint_spans(rng, "t", text, 6)
            for mode in ("strict", "overlap"):
                assert len(match_spans(g, p, mode)) == len(match_spans(p, g, mode))


def _dataset():
    return Dataset(
        (
            Tweet("t1", "took Zofran this morning"),
            Tweet("t2", "vitamin b6 and unisom again"),
            Tweet("t3", "no mentions here"),
        )
    )


def _gold():
    return [
        SpanAnnotation("t1", 5, 11, "Zofran"),
        SpanAnnotation("t2", 0, 10, "vitamin b6"),
        SpanAnnotation("t2", 15, 21, "unisom"),
    ]


class TestEvaluate:
    def test_perfect_predictions(self):
        report = evaluate(_dataset(), _gold(), _gold())
        for mode in ("strict", "overlap"):
            r = report.mode(mode)
            assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
            assert (r.tp, r.fp, r.fn) == (3, 0, 0)

    def test_empty_predictions(self):
        report = evaluate(_dataset(), _gold(), [])
        for mode in ("strict", "overlap"):
            r = report.mode(mode)
            assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
            assert (r.tp, r.fp, r.fn) == (0, 0, 3)

    def test_boundary_shift_splits_modes(self):
        pred = [SpanAnnotation("t1", 5, 13, "Zofran t")] + _gold()[1:]
        report = evaluate(_dataset(), _gold(), pred)
        assert report.strict.tp == 2 and report.strict.fp == 1 and report.strict.fn == 1
        assert report.overlap.tp == 3 and report.overlap.fp == 0 and report.overlap.fn == 0

    def test_unknown_pred_tweet(self):
        pred = [SpanAnnotation("ghost", 0, 4, "took")]
        with pytest.raises(DataValidationError, match="ghost"):
            evaluate(_dataset(), _gold(), pred)

    def test_swap_swaps_precision_recall(self):
        pred = [SpanAnnotation("t1", 5, 11, "Zofran"), SpanAnnotation("t3", 0, 2, "no")]
        forward = evaluate(_dataset(), _gold(), pred)
        backward = evaluate(_dataset(), pred, _gold())
        for mode in ("strict", "overlap"):
            f, b = forward.mode(mode), backward.mode(mode)
            assert f.precision == b.recall
            assert f.recall == b.precision
            assert f.f1 == pytest.approx(b.f1)

    def test_prf_zero_denominators(self):
        assert prf(0, 0, 0) == (0.0, 0.0, 0.0)
        assert prf(0, 5, 0) == (0.0, 0.0, 0.0)
        assert prf(0, 0, 5) == (0.0, 0.0, 0.0)

    def test_count_matches(self):
        g, p = _gold()[:1], _gold()[:1]
        assert count_matches(g, p, "strict") == (1, 0, 0)


class TestReportOutput:
    def test_render_three_decimals(self):
        report = evaluate(_dataset(), _gold(), _gold())
        text = render_report_text(report)
        assert "strict" in text and "overlap" in text
        assert "1.000" in text

    def test_json_full_precision_and_determinism(self, tmp_path):
        pred = _gold()[:2]
        report = evaluate(_dataset(), _gold(), pred)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_report_json(a, report)
        write_report_json(b, evaluate(_dataset(), _gold(), pred))
        assert a.read_bytes() == b.read_bytes()
        payload = json.loads(a.read_text(encoding="utf-8"))
        assert payload["strict"]["f1"] == pytest.approx(2 * (2 / 2) * (2 / 3) / ((2 / 2) + (2 / 3)))
        assert payload["strict"]["per_tweet"]

    def test_report_dict_counts(self):
        report = evaluate(_dataset(), _gold(), [])
        payload = report_to_dict(report)
        assert payload["overlap"]["fn"] == 3


class TestDiffReport:
    def test_perfect_gives_header_only(self, tmp_path):
        report = evaluate(_dataset(), _gold(), _gold())
        path = tmp_path / "diff.tsv"
        diff_report(report, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("mode\tkind")

    def test_one_false_positive(self, tmp_path):
        pred = _gold() + [SpanAnnotation("t3", 0, 2, "no")]
        report = evaluate(_dataset(), _gold(), pred)
        path = tmp_path / "diff.tsv"
        diff_report(report, path)
        body = path.read_text(encoding="utf-8").splitlines()[1:]
        assert len(body) == 2  # one FP per mode
        assert all("\tFP\t" in line for line in body)

    def test_boundary_shift_rows(self, tmp_path):
        pred = [SpanAnnotation("t1", 5, 13, "Zofran t")] + _gold()[1:]
        report = evaluate(_dataset(), _gold(), pred)
        path = tmp_path / "diff.tsv"
        diff_report(report, path)
        body = path.read_text(encoding="utf-8").splitlines()[1:]
        strict_rows = [line for line in body if line.startswith("strict\t")]
        overlap_rows = [line for line in body if line.startswith("overlap\t")]
        assert len(strict_rows) == 2  # FP and FN
        assert {row.split("\t")[1] for row in strict_rows} == {"FP", "FN"}
        assert overlap_rows == []
