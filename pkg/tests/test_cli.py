import json

import pytest

from medtag import Dataset, save_annotations, save_tweets
from medtag.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, run_cli

from conftest import build_synthetic_corpus
from test_pipeline import slice_dataset, write_corpus


@pytest.fixture()
def workspace(tmp_path):
    dataset = build_synthetic_corpus(60, seed=41)
    train = slice_dataset(dataset, 0, 40)
    dev = slice_dataset(dataset, 40, 50)
    test = slice_dataset(dataset, 50, 60)
    paths = {
        "train": write_corpus(tmp_path, "train", train),
        "dev": write_corpus(tmp_path, "dev", dev),
        "test": write_corpus(tmp_path, "test", test),
    }
    return tmp_path, paths


def run_ok(argv):
    code = run_cli(argv)
    assert code == EXIT_OK, argv
    return code


class TestFullFlow:
    def test_tokenize_bio_train_predict_fuse_eval(self, workspace, capsys):
        tmp, paths = workspace
        for split in ("train", "dev", "test"):
            run_ok(["tokenize", "--in", paths[split][0], "--out", str(tmp / f"{split}-tokens.jsonl")])
            run_ok(
                [
                    "bio",
                    "--tokens", str(tmp / f"{split}-tokens.jsonl"),
                    "--spans", paths[split][1],
                    "--tweets", paths[split][0],
                    "--out", str(tmp / f"{split}-labeled.jsonl"),
                ]
            )
        run_ok(
            [
                "train",
                "--labeled", str(tmp / "train-labeled.jsonl"),
                "--dev", str(tmp / "dev-labeled.jsonl"),
                "--seed", "3",
                "--epochs", "4",
                "--out", str(tmp / "model.json"),
            ]
        )
        run_ok(
            [
                "predict",
                "--model", str(tmp / "model.json"),
                "--tokens", str(tmp / "test-tokens.jsonl"),
                "--out", str(tmp / "probs-a.jsonl"),
            ]
        )
        run_ok(
            [
                "fuse",
                "--probs", str(tmp / "probs-a.jsonl"), str(tmp / "probs-a.jsonl"),
                "--weights", "1,2",
                "--out", str(tmp / "fused.jsonl"),
            ]
        )
        run_ok(
            [
                "bio", "--reverse",
                "--labeled", str(tmp / "test-labeled.jsonl"),
                "--tweets", paths["test"][0],
                "--out", str(tmp / "gold-again.tsv"),
            ]
        )
        capsys.readouterr()
        run_ok(
            [
                "eval",
                "--gold", paths["test"][1],
                "--pred", str(tmp / "gold-again.tsv"),
                "--tweets", paths["test"][0],
                "--out", str(tmp / "report.json"),
                "--diff", str(tmp / "diff.tsv"),
            ]
        )
        captured = capsys.readouterr()
        assert "strict" in captured.out
        report = json.loads((tmp / "report.json").read_text(encoding="utf-8"))
        assert report["strict"]["f1"] == 1.0
        assert (tmp / "diff.tsv").read_text(encoding="utf-8").count("\n") == 1

    def test_run_subcommand(self, workspace, capsys):
        tmp, paths = workspace
        config = {
            "mode": "single",
            "out_dir": str(tmp / "run-out"),
            "seed": 9,
            "train_tweets": paths["train"][0],
            "train_annotations": paths["train"][1],
            "dev_tweets": paths["dev"][0],
            "dev_annotations": paths["dev"][1],
            "test_tweets": paths["test"][0],
            "test_annotations": paths["test"][1],
            "epochs": 3,
        }
        config_path = tmp / "run.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        run_ok(["run", "--config", str(config_path)])
        out = capsys.readouterr().out
        assert "strict" in out
        assert (tmp / "run-out" / "report.json").exists()

    def test_split_and_search(self, workspace, capsys):
        tmp, paths = workspace
        run_ok(["split", "--in", paths["train"][0], "--k", "5", "--seed", "1",
                "--out", str(tmp / "folds.tsv")])
        header = (tmp / "folds.tsv").read_text(encoding="utf-8").splitlines()[0]
        assert header.startswith("# seed=1 k=5")
        run_ok(["tokenize", "--in", paths["dev"][0], "--out", str(tmp / "dev-tokens.jsonl")])
        run_ok(["bio", "--tokens", str(tmp / "dev-tokens.jsonl"), "--spans", paths["dev"][1],
                "--out", str(tmp / "dev-labeled.jsonl")])
        run_ok(["tokenize", "--in", paths["train"][0], "--out", str(tmp / "train-tokens.jsonl")])
        run_ok(["bio", "--tokens", str(tmp / "train-tokens.jsonl"), "--spans", paths["train"][1],
                "--out", str(tmp / "train-labeled.jsonl")])
        run_ok(["train", "--labeled", str(tmp / "train-labeled.jsonl"),
                "--dev", str(tmp / "dev-labeled.jsonl"), "--seed", "2", "--epochs", "3",
                "--out", str(tmp / "model.json")])
        run_ok(["predict", "--model", str(tmp / "model.json"),
                "--tokens", str(tmp / "dev-tokens.jsonl"), "--out", str(tmp / "probs.jsonl")])
        capsys.readouterr()
        run_ok(
            [
                "search-weights",
                "--probs", str(tmp / "probs.jsonl"),
                "--gold", paths["dev"][1],
                "--tokens", str(tmp / "dev-tokens.jsonl"),
                "--iters", "5",
                "--seed", "11",
                "--out", str(tmp / "search.json"),
            ]
        )
        out = capsys.readouterr().out
        assert "best strict F1" in out
        payload = json.loads((tmp / "search.json").read_text(encoding="utf-8"))
        assert len(payload["trace"]) == 5
        assert payload["grid"] == {"low": 0.0, "high": 2.0, "step": 0.1,
                                   "iterations": 5, "seed": 11}


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert run_cli(["tokenize", "--nope"]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err

    def test_missing_subcommand(self, capsys):
        assert run_cli([]) == EXIT_USAGE

    def test_unknown_subcommand(self, capsys):
        assert run_cli(["frobnicate"]) == EXIT_USAGE

    def test_help_exits_zero(self, capsys):
        assert run_cli(["--help"]) == EXIT_OK
        assert "COMMAND" in capsys.readouterr().out

    def test_subcommand_help_exits_zero(self, capsys):
        for command in ("tokenize", "bio", "train", "predict", "fuse",
                        "search-weights", "split", "eval", "run"):
            assert run_cli([command, "--help"]) == EXIT_OK
            out = capsys.readouterr().out
            assert "--out" in out or "--config" in out

    def test_search_weights_zero_iters(self, workspace, capsys):
        tmp, paths = workspace
        code = run_cli(
            [
                "search-weights",
                "--probs", "whatever.jsonl",
                "--gold", paths["dev"][1],
                "--tokens", "whatever-tokens.jsonl",
                "--iters", "0",
            ]
        )
        assert code == EXIT_USAGE
        assert "--iters" in capsys.readouterr().err

    def test_validation_failure_is_exit_2(self, workspace, tmp_path, capsys):
        tmp, paths = workspace
        bad = tmp_path / "bad.tsv"
        bad.write_text("ghost\t0\t4\ttook\tdrug\n", encoding="utf-8")
        code = run_cli(
            ["eval", "--gold", str(bad), "--pred", str(bad), "--tweets", paths["test"][0]]
        )
        assert code == EXIT_DATA
        assert "ghost" in capsys.readouterr().err

    def test_missing_input_file_is_exit_2(self, capsys):
        code = run_cli(["tokenize", "--in", "does-not-exist.jsonl", "--out", "x.jsonl"])
        assert code == EXIT_DATA

    def test_fuse_conflicting_flags(self, capsys):
        code = run_cli(["fuse", "--probs", "a", "--weights", "1", "--mean", "--out", "x"])
        assert code == EXIT_USAGE

    def test_fuse_with_config_file(self, workspace, tmp_path, capsys):
        tmp, paths = workspace
        run_ok(["tokenize", "--in", paths["test"][0], "--out", str(tmp / "tok.jsonl")])
        run_ok(["bio", "--tokens", str(tmp / "tok.jsonl"), "--spans", paths["test"][1],
                "--out", str(tmp / "lab.jsonl")])
        run_ok(["train", "--labeled", str(tmp / "lab.jsonl"), "--dev", str(tmp / "lab.jsonl"),
                "--seed", "1", "--epochs", "2", "--out", str(tmp / "m.json")])
        run_ok(["predict", "--model", str(tmp / "m.json"), "--tokens", str(tmp / "tok.jsonl"),
                "--out", str(tmp / "alpha.jsonl")])
        run_ok(["predict", "--model", str(tmp / "m.json"), "--tokens", str(tmp / "tok.jsonl"),
                "--out", str(tmp / "beta.jsonl")])
        config_path = tmp_path / "ensemble.json"
        config_path.write_text(
            json.dumps({"members": ["beta", "alpha"], "weights": [2.0, 1.0]}),
            encoding="utf-8",
        )
        run_ok(["fuse", "--probs", str(tmp / "alpha.jsonl"), str(tmp / "beta.jsonl"),
                "--config", str(config_path), "--out", str(tmp / "fused.jsonl")])
        bad_config = tmp_path / "bad.json"
        bad_config.write_text(
            json.dumps({"members": ["gamma", "alpha"], "weights": [2.0, 1.0]}),
            encoding="utf-8",
        )
        code = run_cli(["fuse", "--probs", str(tmp / "alpha.jsonl"), str(tmp / "beta.jsonl"),
                        "--config", str(bad_config), "--out", str(tmp / "f2.jsonl")])
        assert code == EXIT_USAGE

    def test_version(self, capsys):
        assert run_cli(["--version"]) == EXIT_OK


class TestIdempotenceAndAtomicity:
    def test_rerun_byte_identical(self, workspace):
        tmp, paths = workspace
        a, b = tmp / "a.jsonl", tmp / "b.jsonl"
        run_ok(["tokenize", "--in", paths["test"][0], "--out", str(a)])
        run_ok(["tokenize", "--in", paths["test"][0], "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_no_partial_output_on_failure(self, workspace, tmp_path, capsys):
        tmp, paths = workspace
        out = tmp_path / "never.jsonl"
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"id":"t1","text":"a"}\n{"id":"t1","text":"b"}\n', encoding="utf-8")
        code = run_cli(["tokenize", "--in", str(bad), "--out", str(out)])
        assert code == EXIT_DATA
        assert not out.exists()
        assert not list(tmp_path.glob("*.tmp"))


class TestSeedFallback:
    def test_env_seed_used(self, workspace, monkeypatch):
        tmp, paths = workspace
        monkeypatch.setenv("MEDTAG_SEED", "77")
        run_ok(["split", "--in", paths["train"][0], "--k", "4", "--out", str(tmp / "f1.tsv")])
        monkeypatch.delenv("MEDTAG_SEED")
        run_ok(["split", "--in", paths["train"][0], "--k", "4", "--seed", "77",
                "--out", str(tmp / "f2.tsv")])
        assert (tmp / "f1.tsv").read_bytes() == (tmp / "f2.tsv").read_bytes()

    def test_bad_env_seed(self, workspace, monkeypatch, capsys):
        tmp, paths = workspace
        monkeypatch.setenv("MEDTAG_SEED", "abc")
        code = run_cli(["split", "--in", paths["train"][0], "--k", "4",
                        "--out", str(tmp / "f.tsv")])
        assert code == EXIT_USAGE
        assert "MEDTAG_SEED" in capsys.readouterr().err


def test_console_entry_point_runs():
    import subprocess

    proc = subprocess.run(["medtag", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "tokenize" in proc.stdout
