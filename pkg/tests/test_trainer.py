import math

import numpy as np
import pytest
import torch

from ltcsrnn.network import ModelSpec, build_model, default_layers, forward_batch
from ltcsrnn.trainer import (
    LabeledFrames,
    TrainConfig,
    UnsupportedModeError,
    clone_model,
    evaluate,
    grad_check,
    loss,
    train,
    write_metrics_csv,
)


def tiny_model(kind="ltc", width=8, depth=2, num_classes=2, seed=0):
    spec = ModelSpec(
        input_shape=(2, 2, 2),
        layers=default_layers(8, width=width, depth=depth, neuron_kind=kind),
        num_classes=num_classes,
    )
    return build_model(spec, seed=seed)


def separable_dataset(rng, n_per_class=24, t=6, num_classes=2):
    """Class k lights up input channel k plus noise; trivially learnable."""
    frames, labels = [], []
    for k in range(num_classes):
        for _ in range(n_per_class):
            f = rng.random((t, 2, 2, 2), dtype=np.float32) * 0.1
            f[:, k % 2, :, :] += 1.0
            frames.append(f)
            labels.append(k)
    return LabeledFrames(np.stack(frames), np.asarray(labels, np.int64))


class TestLoss:
    def test_uniform_scores_give_log_k(self):
        for k in (2, 5, 11):
            assert float(loss(torch.zeros(k), 0)) == pytest.approx(math.log(k), abs=1e-6)

    def test_two_class_closed_form(self):
        assert float(loss(torch.zeros(2), 0)) == pytest.approx(0.6931, abs=1e-4)
        assert float(loss(torch.zeros(2), 1)) == pytest.approx(0.6931, abs=1e-4)

    def test_large_margin_goes_to_zero(self):
        scores = torch.tensor([30.0, 0.0, 0.0])
        assert float(loss(scores, 0)) < 1e-10

    def test_batch_is_mean_of_rows(self):
        scores = torch.randn(4, 3)
        labels = torch.tensor([0, 2, 1, 1])
        rows = [float(loss(scores[i], int(labels[i]))) for i in range(4)]
        assert float(loss(scores, labels)) == pytest.approx(np.mean(rows), abs=1e-6)


class TestGradCheck:
    @pytest.mark.parametrize("kind", ["ltc", "alif", "lif"])
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(21)
        model = tiny_model(kind)
        frames = rng.random((5, 2, 2, 2), dtype=np.float32)
        assert grad_check(model, frames, label=1) <= 1e-3

    def test_spiking_mode_unsupported(self):
        with pytest.raises(UnsupportedModeError):
            grad_check(tiny_model(), np.zeros((5, 2, 2, 2), np.float32), 0, mode="spiking")

    def test_dead_input_has_zero_gradient(self):
        model = tiny_model()
        frames = np.random.default_rng(3).random((5, 2, 2, 2)).astype(np.float32)
        frames.reshape(5, 8)[:, 0] = 0.0    # input dim 0 never active
        work = clone_model(model, requires_grad=True)
        out = loss(forward_batch(work, torch.tensor(frames).unsqueeze(0), "relu"), torch.tensor([0]))
        out.backward()
        assert torch.equal(work.layers[0].w_in.grad[0], torch.zeros_like(work.layers[0].w_in.grad[0]))


class TestTrain:
    def test_zero_epochs_is_identity(self):
        model = tiny_model()
        data = separable_dataset(np.random.default_rng(0), n_per_class=4)
        out, metrics = train(model, data, TrainConfig(epochs=0))
        assert metrics == []
        for name, t in model.parameters().items():
            assert torch.equal(out.parameters()[name], t)

    def test_deterministic_given_seed(self):
        data = separable_dataset(np.random.default_rng(1))
        cfg = TrainConfig(epochs=2, batch_size=8, rng_seed=7)
        _, m1 = train(tiny_model(), data, cfg)
        _, m2 = train(tiny_model(), data, cfg)
        assert m1 == m2

    def test_loss_decreases_on_separable_task(self):
        data = separable_dataset(np.random.default_rng(2))
        trained, metrics = train(tiny_model(), data, TrainConfig(epochs=5, batch_size=8, learning_rate=0.2))
        assert metrics[-1]["train_loss"] < metrics[0]["train_loss"]
        assert evaluate(trained, data, mode="relu").accuracy >= 0.9

    def test_metrics_csv(self, tmp_path):
        data = separable_dataset(np.random.default_rng(3), n_per_class=6)
        _, metrics = train(tiny_model(), data, TrainConfig(epochs=2, batch_size=4))
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, metrics)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"
        assert len(lines) == 3


class TestEvaluate:
    def test_perfect_predictions(self):
        data = separable_dataset(np.random.default_rng(4))
        trained, _ = train(tiny_model(), data, TrainConfig(epochs=5, batch_size=8, learning_rate=0.2))
        result = evaluate(trained, data, mode="relu")
        if result.accuracy == 1.0:
            assert np.all(result.confusion == np.diag(np.diag(result.confusion)))
        assert result.confusion.sum() == len(data)

    def test_chance_level_for_random_weights(self):
        k = 4
        rng = np.random.default_rng(5)
        n = 400
        frames = rng.random((n, 4, 2, 2, 2), dtype=np.float32)
        labels = rng.integers(0, k, size=n).astype(np.int64)
        model = tiny_model(num_classes=k, seed=9)
        acc = evaluate(model, LabeledFrames(frames, labels), mode="relu").accuracy
        sigma = math.sqrt(0.25 * 0.75 / n)
        assert abs(acc - 1.0 / k) <= 3 * sigma + 1e-9

    def test_model_untouched(self):
        model = tiny_model()
        before = {n: t.clone() for n, t in model.parameters().items()}
        data = separable_dataset(np.random.default_rng(6), n_per_class=4)
        evaluate(model, data, mode="spiking")
        for name, t in model.parameters().items():
            assert torch.equal(t, before[name])
