import json

import pytest

from medtag import (
    ConfigError,
    Dataset,
    DataValidationError,
    RunConfig,
    load_prob_file,
    load_run_config,
    run,
    save_annotations,
    save_tweets,
)
from medtag.corpus import load_fold_assignment
from medtag.pipeline import run_weighted_ensemble

from conftest import build_synthetic_corpus


def write_corpus(tmp_path, name, dataset):
    tweets_path = tmp_path / f"{name}-tweets.jsonl"
    gold_path = tmp_path / f"{name}-gold.tsv"
    save_tweets(tweets_path, list(dataset.tweets))
    save_annotations(gold_path, list(dataset.annotations))
    return str(tweets_path), str(gold_path)


def slice_dataset(dataset, lo, hi):
    tweets = dataset.tweets[lo:hi]
    ids = {t.id for t in tweets}
    return Dataset(tweets, tuple(a for a in dataset.annotations if a.tweet_id in ids))


@pytest.fixture(scope="module")
def corpus_files(tmp_path_factory):
    base = tmp_path_factory.mktemp("corpus")
    dataset = build_synthetic_corpus(120, seed=31)
    train = slice_dataset(dataset, 0, 80)
    dev = slice_dataset(dataset, 80, 100)
    test = slice_dataset(dataset, 100, 120)
    return {
        "train": write_corpus(base, "train", train),
        "dev": write_corpus(base, "dev", dev),
        "test": write_corpus(base, "test", test),
    }


class TestRunConfig:
    def test_bad_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            RunConfig(mode="turbo", out_dir="x")

    def test_single_requires_all_corpora(self):
        with pytest.raises(ConfigError, match="dev_tweets"):
            RunConfig(mode="single", out_dir="x", train_tweets="a", train_annotations="b")

    def test_weighted_requires_probs_and_weights(self):
        with pytest.raises(ConfigError, match="prob_files"):
            RunConfig(
                mode="weighted-ensemble",
                out_dir="x",
                test_tweets="a",
                test_annotations="b",
                weights=(1.0,),
            )
        with pytest.raises(ConfigError, match="weights"):
            RunConfig(
                mode="weighted-ensemble",
                out_dir="x",
                prob_files=("p.jsonl",),
                test_tweets="a",
                test_annotations="b",
            )

    def test_weights_length_mismatch(self):
        with pytest.raises(ConfigError, match="weights"):
            RunConfig(
                mode="weighted-ensemble",
                out_dir="x",
                prob_files=("a", "b"),
                weights=(1.0,),
                test_tweets="t",
                test_annotations="g",
            )

    def test_oof_needs_k(self):
        with pytest.raises(ConfigError, match="k >= 2"):
            RunConfig(
                mode="out-of-fold-ensemble",
                out_dir="x",
                train_tweets="a",
                train_annotations="b",
                k=1,
            )

    def test_load_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"mode": "single", "out_dir": "x", "bogus": 1}', encoding="utf-8")
        with pytest.raises(ConfigError, match="bogus"):
            load_run_config(path)

    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "run.json"
        payload = {
            "mode": "weighted-ensemble",
            "out_dir": str(tmp_path / "out"),
            "prob_files": ["a.jsonl"],
            "weights": [1.0],
            "test_tweets": "t.jsonl",
            "test_annotations": "g.tsv",
        }
        path.write_text(json.dumps(payload), encoding="utf-8")
        config = load_run_config(path)
        assert config.mode == "weighted-ensemble"
        assert config.prob_files == ("a.jsonl",)
        assert config.weights == (1.0,)


class TestSingleMode:
    def test_end_to_end(self, corpus_files, tmp_path):
        out = tmp_path / "run-single"
        config = RunConfig(
            mode="single",
            out_dir=str(out),
            seed=7,
            train_tweets=corpus_files["train"][0],
            train_annotations=corpus_files["train"][1],
            dev_tweets=corpus_files["dev"][0],
            dev_annotations=corpus_files["dev"][1],
            test_tweets=corpus_files["test"][0],
            test_annotations=corpus_files["test"][1],
            epochs=5,
        )
        result = run(config)
        # smoke bound for an 80-tweet training slice; the acceptance suite
        # pins the 0.90 floor at the full 500-tweet scale
        assert result.report.strict.f1 >= 0.8
        for name in ("model.json", "tokens.jsonl", "probs-model.jsonl", "spans.tsv",
                     "report.json", "diff.tsv"):
            assert (out / name).exists()


class TestOutOfFold:
    def _config(self, corpus_files, out, seed=13, test=True):
        kwargs = dict(
            mode="out-of-fold-ensemble",
            out_dir=str(out),
            seed=seed,
            train_tweets=corpus_files["train"][0],
            train_annotations=corpus_files["train"][1],
            dev_tweets=corpus_files["dev"][0],
            dev_annotations=corpus_files["dev"][1],
            k=5,
            epochs=3,
        )
        if test:
            kwargs["test_tweets"] = corpus_files["test"][0]
            kwargs["test_annotations"] = corpus_files["test"][1]
        return RunConfig(**kwargs)

    def test_artifacts_and_fold_sizes(self, corpus_files, tmp_path):
        out = tmp_path / "run-oof"
        run(self._config(corpus_files, out))
        fa = load_fold_assignment(out / "folds.tsv")
        assert fa.k == 5
        sizes = sorted((len(fa.fold_ids(f)) for f in range(5)), reverse=True)
        assert len(fa.assignment) == 100  # train (80) + dev (20) combined
        assert max(sizes) - min(sizes) <= 1
        for fold in range(5):
            assert (out / f"model-fold{fold}.json").exists()
            assert (out / f"probs-fold{fold}.jsonl").exists()
        assert (out / "oof-probs.jsonl").exists()
        assert (out / "fused.jsonl").exists()

    def test_oof_probs_cover_corpus_once(self, corpus_files, tmp_path):
        out = tmp_path / "run-oof2"
        run(self._config(corpus_files, out))
        matrices = load_prob_file(out / "oof-probs.jsonl")
        ids = [m.tweet_id for m in matrices]
        assert len(ids) == len(set(ids)) == 100

    def test_rerun_is_byte_identical(self, corpus_files, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run(self._config(corpus_files, out_a))
        run(self._config(corpus_files, out_b))
        for name in ("folds.tsv", "oof-probs.jsonl", "probs-fold0.jsonl",
                     "fused.jsonl", "spans.tsv", "report.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name

    def test_without_test_set_evaluates_out_of_fold(self, corpus_files, tmp_path):
        out = tmp_path / "run-oof3"
        result = run(self._config(corpus_files, out, test=False))
        # every in-corpus prediction comes from a model that never saw it
        assert result.report.strict.tp > 0
        assert not (out / "fused.jsonl").exists()

    def test_mode_equivalence_with_equal_weights(self, corpus_files, tmp_path):
        oof_out = tmp_path / "oof"
        run(self._config(corpus_files, oof_out))
        weighted_out = tmp_path / "weighted"
        config = RunConfig(
            mode="weighted-ensemble",
            out_dir=str(weighted_out),
            prob_files=tuple(str(oof_out / f"probs-fold{f}.jsonl") for f in range(5)),
            weights=(1.0,) * 5,
            test_tweets=corpus_files["test"][0],
            test_annotations=corpus_files["test"][1],
        )
        run(config)
        for name in ("fused.jsonl", "spans.tsv", "report.json"):
            assert (oof_out / name).read_bytes() == (weighted_out / name).read_bytes(), name


class TestWeightedEnsemble:
    def test_single_member_identity(self, corpus_files, tmp_path):
        oof_out = tmp_path / "oof"
        run(
            RunConfig(
                mode="out-of-fold-ensemble",
                out_dir=str(oof_out),
                seed=13,
                train_tweets=corpus_files["train"][0],
                train_annotations=corpus_files["train"][1],
                k=5,
                epochs=2,
                test_tweets=corpus_files["test"][0],
                test_annotations=corpus_files["test"][1],
            )
        )
        member = str(oof_out / "probs-fold0.jsonl")
        solo_out = tmp_path / "solo"
        result = run(
            RunConfig(
                mode="weighted-ensemble",
                out_dir=str(solo_out),
                prob_files=(member,),
                weights=(1.0,),
                test_tweets=corpus_files["test"][0],
                test_annotations=corpus_files["test"][1],
            )
        )
        fused = load_prob_file(solo_out / "fused.jsonl")
        original = load_prob_file(member)
        for a, b in zip(fused, original):
            assert a.tweet_id == b.tweet_id
            assert abs(a.probs - b.probs).max() < 1e-12
        assert result.report.strict.tp >= 0

    def test_token_count_mismatch_names_tweet(self, tmp_path):
        dataset = build_synthetic_corpus(3, seed=2, p_entity=1.0)
        tweets_path, gold_path = write_corpus(tmp_path, "mini", dataset)
        first_id = dataset.tweets[0].id
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        header = "#schema=medtag-probs-v1\n"
        row = [1.0, 0.0, 0.0]
        lines_a, lines_b = [header], [header]
        for tweet in dataset.tweets:
            tokens = [{"start": 0, "end": 2}, {"start": 3, "end": 5}]
            lines_a.append(
                json.dumps({"id": tweet.id, "tokens": tokens, "probs": [row, row]}) + "\n"
            )
            short = tokens[:1] if tweet.id == first_id else tokens
            probs = [row] if tweet.id == first_id else [row, row]
            lines_b.append(
                json.dumps({"id": tweet.id, "tokens": short, "probs": probs}) + "\n"
            )
        a.write_text("".join(lines_a), encoding="utf-8")
        b.write_text("".join(lines_b), encoding="utf-8")
        config = RunConfig(
            mode="weighted-ensemble",
            out_dir=str(tmp_path / "out"),
            prob_files=(str(a), str(b)),
            weights=(1.0, 1.0),
            test_tweets=tweets_path,
            test_annotations=gold_path,
        )
        with pytest.raises(DataValidationError, match=first_id):
            run_weighted_ensemble(config)
