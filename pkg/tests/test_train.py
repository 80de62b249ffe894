"""Training-loop contracts, curve files, tables, checkpoints, evaluation."""

import numpy as np
import pytest

import sentclass.models as M
from sentclass.harness.data import Dataset
from sentclass.harness.run import (
    ConfigError,
    CurvePoint,
    LearningCurve,
    RunConfig,
    build_encoder,
    compare_table,
    config_to_text,
    emit_curve,
    evaluate,
    load_curve,
    parse_config_text,
    train_run,
)
from sentclass.harness.synth import corpus_tokens, write_embeddings_file
from sentclass.models.checkpoint import (
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)


def tiny_dataset(n=24, classes=2, seed=0):
    """Linearly separable keyword corpus: class i sentences contain cue_i twice."""
    rng = np.random.default_rng(seed)
    fillers = [f"pad{i}" for i in range(6)]
    examples = []
    for i in range(n):
        cls = i % classes
        tokens = [f"cue{cls}", f"cue{cls}"] \
            + [fillers[int(j)] for j in rng.integers(0, 6, size=3)]
        rng.shuffle(tokens)
        examples.append((cls, list(tokens)))
    return Dataset(examples, [f"c{i}" for i in range(classes)])


class TestTrainRunContracts:
    def test_single_epoch_single_record(self):
        data = tiny_dataset()
        cfg = RunConfig(arch="fnn", encoding="counts", dim=64, epochs=1,
                        optimizer="sgd", lr=0.1, batch=8, seed=1)
        _, curve = train_run(cfg, data, data)
        assert len(curve) == 1
        assert curve.points[0].iteration == 1

    def test_iterations_strictly_increasing_from_one(self):
        data = tiny_dataset()
        cfg = RunConfig(arch="fnn", encoding="counts", dim=64, epochs=4,
                        optimizer="adagrad", seed=2, batch=8)
        _, curve = train_run(cfg, data, data)
        assert [p.iteration for p in curve.points] == [1, 2, 3, 4]

    def test_same_config_bit_identical(self):
        data = tiny_dataset(32)
        cfg = RunConfig(arch="cnn", encoding="onehot", dim=32, epochs=3,
                        filters=8, hidden=6, window=2, max_len=6, batch=8, seed=3)
        params_a, curve_a = train_run(cfg, data, data)
        params_b, curve_b = train_run(cfg, data, data)
        for name, tensor in params_a.tensors().items():
            np.testing.assert_array_equal(tensor, params_b.tensors()[name])
        assert [(p.iteration, p.train_loss, p.test_accuracy) for p in curve_a.points] \
            == [(p.iteration, p.train_loss, p.test_accuracy) for p in curve_b.points]

    def test_separable_fnn_reaches_perfect_accuracy(self):
        data = tiny_dataset(40)
        cfg = RunConfig(arch="fnn", encoding="counts", dim=128, epochs=20,
                        optimizer="lbfgs", seed=4)
        _, curve = train_run(cfg, data, data)
        assert curve.best_accuracy == 1.0

    def test_accuracy_in_unit_interval_and_finite_losses(self):
        data = tiny_dataset(30, classes=3)
        cfg = RunConfig(arch="rnn", encoding="onehot", dim=32, hidden=8,
                        epochs=3, max_len=6, batch=8, seed=5)
        _, curve = train_run(cfg, data, data)
        for p in curve.points:
            assert 0.0 <= p.test_accuracy <= 1.0
            assert np.isfinite(p.train_loss)

    def test_incompatible_encoding_rejected(self):
        data = tiny_dataset()
        with pytest.raises(ConfigError):
            train_run(RunConfig(arch="fnn", encoding="onehot"), data, data)
        with pytest.raises(ConfigError):
            train_run(RunConfig(arch="cnn", encoding="counts"), data, data)
        with pytest.raises(ConfigError):
            train_run(RunConfig(arch="cnn", encoding="glove", embeddings=None),
                      data, data)

    def test_divergence_reported_with_iteration(self):
        data = tiny_dataset()
        # a step this size overflows the weights to inf, so the next
        # forward pass produces NaN logits
        cfg = RunConfig(arch="fnn", encoding="counts", dim=32, epochs=10,
                        optimizer="sgd", lr=1e307, batch=8, seed=6)
        from sentclass.harness.run import DivergedError
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(DivergedError, match="iteration"):
                train_run(cfg, data, data)

    def test_embedding_encoding_end_to_end(self, tmp_path):
        data = tiny_dataset(30)
        vec_path = tmp_path / "vectors.txt"
        write_embeddings_file(vec_path, corpus_tokens(data), dim=8, seed=0)
        cfg = RunConfig(arch="lstm", encoding="glove", embeddings=str(vec_path),
                        hidden=6, epochs=3, max_len=6, batch=8, seed=7)
        params, curve = train_run(cfg, data, data)
        assert isinstance(params, M.LstmParams)
        assert len(curve) == 3

    def test_fine_tune_changes_embeddings_and_learns(self, tmp_path):
        data = tiny_dataset(30)
        vec_path = tmp_path / "vectors.txt"
        write_embeddings_file(vec_path, corpus_tokens(data), dim=8, seed=1)
        cfg = RunConfig(arch="cnn", encoding="glove", embeddings=str(vec_path),
                        filters=8, hidden=6, window=2, epochs=4, max_len=6,
                        batch=8, seed=8, fine_tune=True)
        encoder = build_encoder(cfg, data)
        before = encoder.table.vector("cue0").copy()
        params, curve = train_run(cfg, data, data, encoder=encoder)
        after = encoder.table.vector("cue0")
        assert np.any(before != after)
        assert curve.best_accuracy >= 0.9

    def test_fine_tune_embedding_gradient_matches_finite_differences(self, tmp_path):
        from sentclass.harness.run import _FineTuner
        from sentclass.models.cnn import cnn_batch_grads

        data = tiny_dataset(12)
        vec_path = tmp_path / "vectors.txt"
        write_embeddings_file(vec_path, corpus_tokens(data), dim=5, seed=2)
        cfg = RunConfig(arch="cnn", encoding="glove", embeddings=str(vec_path),
                        filters=4, hidden=4, window=2, max_len=6, seed=3,
                        dropout=0.0, fine_tune=True)
        encoder = build_encoder(cfg, data)
        tuner = _FineTuner(encoder, data, data)
        params = M.init_params(
            M.CnnSpec(embed_dim=5, classes=2, n_filters=4, window=2, hidden=4,
                      dropout=0.0), 6)
        sel = np.arange(len(data))
        ys = np.array([label for label, _ in data.examples])

        def mean_loss():
            losses, _ = cnn_batch_grads(params, tuner.gather_train(sel), ys,
                                        train=False)
            return float(losses.mean())

        _, _, dx = cnn_batch_grads(params, tuner.gather_train(sel), ys,
                                   train=False, want_dx=True)
        grad = tuner.scatter_grad(sel, dx)
        eps = 1e-6
        for row, col in ((0, 1), (3, 2), (tuner.pad_row, 0)):
            tuner.matrix[row, col] += eps
            up = mean_loss()
            tuner.matrix[row, col] -= 2 * eps
            down = mean_loss()
            tuner.matrix[row, col] += eps
            numeric = (up - down) / (2 * eps)
            if row == tuner.pad_row:
                assert grad[row, col] == 0.0  # padding row stays pinned
            else:
                assert grad[row, col] == pytest.approx(numeric, abs=1e-6)


class TestEvaluate:
    def test_oracle_lookup_scores_one(self):
        data = tiny_dataset(20)
        cfg = RunConfig(arch="fnn", encoding="counts", dim=128, epochs=15,
                        optimizer="lbfgs", seed=9)
        encoder = build_encoder(cfg, data)
        params, _ = train_run(cfg, data, data, encoder=encoder)
        assert evaluate(params, data, encoder) == 1.0

    def test_constant_predictor_on_balanced_set(self):
        data = tiny_dataset(25, classes=5, seed=10)
        # zero parameters predict class 0 everywhere (argmax tie rule)
        params = M.FnnParams(weights=[np.zeros((16, 5))], biases=[np.zeros(5)])
        encoder = build_encoder(RunConfig(arch="fnn", encoding="counts", dim=16),
                                data)
        assert evaluate(params, data, encoder) == pytest.approx(0.2)

    def test_matches_manual_scoring(self):
        data = tiny_dataset(10)
        cfg = RunConfig(arch="cnn", encoding="onehot", dim=32, filters=6,
                        hidden=5, window=2, epochs=2, max_len=6, batch=4, seed=11)
        encoder = build_encoder(cfg, data)
        params, _ = train_run(cfg, data, data, encoder=encoder)
        hits = 0
        for label, tokens in data.examples:
            hits += int(M.predict(params, encoder.encode(tokens)) == label)
        assert evaluate(params, data, encoder) == pytest.approx(hits / len(data))


class TestCurveFiles:
    def curve(self):
        return LearningCurve([
            CurvePoint(1, 0.6931471805599453, 0.5, 0.124),
            CurvePoint(2, 0.25, 0.83, 0.25),
        ])

    def test_file_layout(self, tmp_path):
        path = tmp_path / "curve.csv"
        emit_curve(self.curve(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,train_loss,test_accuracy,seconds"
        assert len(lines) == 3
        assert lines[1].startswith("1,0.6931471805599453,0.5000,")

    def test_round_trip_values(self, tmp_path):
        path = tmp_path / "curve.csv"
        original = self.curve()
        emit_curve(original, path)
        loaded = load_curve(path)
        for a, b in zip(original.points, loaded.points):
            assert a.iteration == b.iteration
            assert a.train_loss == b.train_loss
            assert a.test_accuracy == b.test_accuracy

    def test_accuracy_has_at_least_four_digits(self, tmp_path):
        path = tmp_path / "curve.csv"
        emit_curve(LearningCurve([CurvePoint(1, 0.1, 1.0, 0.0)]), path)
        accuracy_field = path.read_text().splitlines()[1].split(",")[2]
        assert accuracy_field == "1.0000"

    def test_awkward_accuracy_still_round_trips(self, tmp_path):
        value = 413 / 498  # needs more than four digits
        path = tmp_path / "curve.csv"
        emit_curve(LearningCurve([CurvePoint(1, 0.1, value, 0.0)]), path)
        assert load_curve(path).points[0].test_accuracy == value


class TestCompareTable:
    def test_single_run(self):
        table = compare_table([("cnn-glove", 0.83)])
        lines = table.splitlines()
        assert len(lines) == 2
        assert "83.00%" in lines[1]

    def test_sorted_descending_with_stable_ties(self):
        table = compare_table([("first", 0.5), ("best", 0.9), ("also", 0.5)])
        names = [line.split()[0] for line in table.splitlines()[1:]]
        assert names == ["best", "first", "also"]

    def test_hand_formatted(self):
        table = compare_table([("a", 0.8301), ("b", 0.7763)])
        assert table == "model  accuracy\na       83.01%\nb       77.63%\n"


class TestCheckpoints:
    @pytest.mark.parametrize("spec,x_shape", [
        (M.FnnSpec((6, 4, 3)), None),
        (M.CnnSpec(embed_dim=4, classes=3, n_filters=5, window=2, hidden=4,
                   dropout=0.2), None),
        (M.RnnSpec(embed_dim=4, classes=3, hidden=5, dropout=0.1), None),
        (M.LstmSpec(embed_dim=4, classes=3, hidden=5, dropout=0.1), None),
    ])
    def test_round_trip_is_bit_exact(self, tmp_path, spec, x_shape):
        params = M.init_params(spec, 13)
        path = tmp_path / "model.ckpt"
        meta = {"labels": ["a", "b", "c"], "encoding": "onehot"}
        save_checkpoint(path, params, meta)
        loaded, loaded_meta = load_checkpoint(path)
        assert type(loaded) is type(params)
        assert loaded_meta == meta
        for name, tensor in params.tensors().items():
            np.testing.assert_array_equal(tensor, loaded.tensors()[name])
        if hasattr(params, "dropout"):
            assert loaded.dropout == params.dropout
        # writing the loaded params again reproduces the bytes exactly
        second = tmp_path / "again.ckpt"
        save_checkpoint(second, loaded, loaded_meta)
        assert path.read_bytes() == second.read_bytes()

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "bogus.ckpt"
        path.write_bytes(b"hello world")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated_tensor_detected(self, tmp_path):
        params = M.init_params(M.FnnSpec((4, 2)), 0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, {})
        blob = path.read_bytes()
        path.write_bytes(blob[:-9])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)


class TestConfigText:
    def test_round_trip(self):
        cfg = RunConfig(arch="lstm", encoding="word2vec", embeddings="/tmp/v.bin",
                        hidden=64, dropout=0.2, fine_tune=True, seed=9)
        parsed = parse_config_text(config_to_text(cfg))
        rebuilt = RunConfig(**parsed)
        assert rebuilt == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="mystery"):
            parse_config_text("mystery=1\n")

    def test_comments_and_blanks_ignored(self):
        parsed = parse_config_text("# a comment\n\nepochs=3  # trailing\n")
        assert parsed == {"epochs": 3}
