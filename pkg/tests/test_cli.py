"""Command-line flows and exit codes."""

import io

import numpy as np
import pytest

from sentclass.harness.cli import main
from sentclass.harness.data import Dataset, write_tsv
from sentclass.harness.run import load_curve


@pytest.fixture()
def corpus_file(tmp_path):
    rng = np.random.default_rng(0)
    examples = []
    for i in range(40):
        cls = i % 2
        tokens = [f"cue{cls}", f"cue{cls}"] \
            + [f"pad{int(j)}" for j in rng.integers(0, 5, size=3)]
        examples.append((cls, tokens))
    path = tmp_path / "corpus.tsv"
    write_tsv(Dataset(examples, ["alpha", "beta"]), path)
    return path


def train_args(corpus_file, out_dir, *extra):
    return ["train", "--arch", "cnn", "--encoding", "onehot", "--dim", "32",
            "--window", "2", "--hidden", "6", "--epochs", "2", "--batch", "8",
            "--max-len", "6", "--seed", "5", "--format", "tsv",
            "--train", str(corpus_file), "--out", str(out_dir), *extra]


class TestTrainCommand:
    def test_successful_run_writes_outputs(self, corpus_file, tmp_path, capsys):
        out_dir = tmp_path / "run"
        assert main(train_args(corpus_file, out_dir)) == 0
        assert (out_dir / "checkpoint.bin").exists()
        assert (out_dir / "curve.csv").exists()
        assert (out_dir / "config.txt").exists()
        assert "best accuracy" in capsys.readouterr().out
        assert len(load_curve(out_dir / "curve.csv")) == 2

    def test_config_file_with_flag_override(self, corpus_file, tmp_path):
        out_dir = tmp_path / "run"
        config = tmp_path / "base.cfg"
        config.write_text("arch=cnn\nencoding=onehot\ndim=32\nwindow=2\n"
                          "hidden=6\nepochs=5\nbatch=8\nmax_len=6\nseed=5\n")
        args = ["train", "--config", str(config), "--epochs", "2",
                "--format", "tsv", "--train", str(corpus_file),
                "--out", str(out_dir)]
        assert main(args) == 0
        assert "epochs=2" in (out_dir / "config.txt").read_text()

    def test_usage_error_exit_code(self, capsys):
        assert main(["train", "--arch", "nonsense"]) == 1

    def test_config_error_exit_code(self, corpus_file, tmp_path, capsys):
        # fnn cannot take one-hot sequences
        args = ["train", "--arch", "fnn", "--encoding", "onehot",
                "--format", "tsv", "--train", str(corpus_file),
                "--out", str(tmp_path / "x")]
        assert main(args) == 1

    def test_data_error_exit_code(self, tmp_path, capsys):
        args = ["train", "--arch", "cnn", "--encoding", "onehot",
                "--format", "tsv", "--train", str(tmp_path / "missing.tsv"),
                "--out", str(tmp_path / "x")]
        assert main(args) == 2

    def test_diverged_exit_code(self, corpus_file, tmp_path, capsys):
        args = ["train", "--arch", "fnn", "--encoding", "counts", "--dim", "32",
                "--optimizer", "sgd", "--lr", "1e307", "--epochs", "10",
                "--batch", "8", "--format", "tsv", "--train", str(corpus_file),
                "--out", str(tmp_path / "x")]
        with np.errstate(over="ignore", invalid="ignore"):
            assert main(args) == 3

    def test_determinism_across_invocations(self, corpus_file, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(train_args(corpus_file, out_a)) == 0
        assert main(train_args(corpus_file, out_b)) == 0
        assert (out_a / "checkpoint.bin").read_bytes() \
            == (out_b / "checkpoint.bin").read_bytes()

        def strip_seconds(path):
            lines = path.read_text().splitlines()
            return [line.rsplit(",", 1)[0] for line in lines]

        assert strip_seconds(out_a / "curve.csv") == strip_seconds(out_b / "curve.csv")
        assert (out_a / "config.txt").read_text() == (out_b / "config.txt").read_text()


class TestEvalAndPredict:
    def test_eval_matches_training_accuracy(self, corpus_file, tmp_path, capsys):
        out_dir = tmp_path / "run"
        # explicit --test so the curve and eval score the same examples
        assert main(train_args(corpus_file, out_dir, "--epochs", "6",
                               "--test", str(corpus_file))) == 0
        capsys.readouterr()
        args = ["eval", "--checkpoint", str(out_dir / "checkpoint.bin"),
                "--test", str(corpus_file), "--format", "tsv"]
        assert main(args) == 0
        printed = capsys.readouterr().out
        final = load_curve(out_dir / "curve.csv").points[-1].test_accuracy
        assert f"accuracy {final:.4f}" in printed

    def test_predict_labels_lines(self, corpus_file, tmp_path, capsys, monkeypatch):
        out_dir = tmp_path / "run"
        assert main(train_args(corpus_file, out_dir, "--epochs", "6")) == 0
        capsys.readouterr()
        monkeypatch.setattr("sys.stdin", io.StringIO("cue0 cue0 pad1\ncue1 cue1 pad2\n"))
        args = ["predict", "--checkpoint", str(out_dir / "checkpoint.bin")]
        assert main(args) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == ["alpha", "beta"]

    def test_predict_counts_checkpoint_round_trip(self, corpus_file, tmp_path,
                                                  capsys, monkeypatch):
        out_dir = tmp_path / "run"
        args = ["train", "--arch", "fnn", "--encoding", "counts", "--dim", "64",
                "--optimizer", "lbfgs", "--epochs", "15", "--format", "tsv",
                "--train", str(corpus_file), "--out", str(out_dir)]
        assert main(args) == 0
        capsys.readouterr()
        monkeypatch.setattr("sys.stdin", io.StringIO("cue1 pad0\n"))
        assert main(["predict", "--checkpoint", str(out_dir / "checkpoint.bin")]) == 0
        assert capsys.readouterr().out.splitlines() == ["beta"]

    def test_blank_prediction_line_is_data_error(self, corpus_file, tmp_path,
                                                 capsys, monkeypatch):
        out_dir = tmp_path / "run"
        assert main(train_args(corpus_file, out_dir)) == 0
        monkeypatch.setattr("sys.stdin", io.StringIO("\n"))
        assert main(["predict", "--checkpoint", str(out_dir / "checkpoint.bin")]) == 2


class TestBench:
    def test_grid_runs_and_table(self, corpus_file, tmp_path, capsys):
        grid = tmp_path / "grid.txt"
        grid.write_text(
            "cnn-onehot arch=cnn encoding=onehot dim=32 window=2 hidden=6 epochs=2\n"
            "fnn-counts arch=fnn encoding=counts dim=64 optimizer=lbfgs epochs=8\n"
        )
        base = tmp_path / "base.cfg"
        base.write_text(f"batch=8\nmax_len=6\nseed=3\ntrain={corpus_file}\nformat=tsv\n")
        out_dir = tmp_path / "bench"
        args = ["bench", "--grid", str(grid), "--config", str(base),
                "--out", str(out_dir)]
        assert main(args) == 0
        table = (out_dir / "table.txt").read_text()
        assert table.splitlines()[0].startswith("model")
        assert "cnn-onehot" in table and "fnn-counts" in table
        assert (out_dir / "cnn-onehot" / "curve.csv").exists()
        assert (out_dir / "fnn-counts" / "checkpoint.bin").exists()
        assert "%" in capsys.readouterr().out

    def test_empty_grid_rejected(self, tmp_path):
        grid = tmp_path / "grid.txt"
        grid.write_text("# nothing here\n")
        assert main(["bench", "--grid", str(grid)]) == 1

    def test_missing_subcommand_is_usage_error(self):
        assert main([]) == 1
