import json

import numpy as np
import pytest

from xailab import netcore as nc
from xailab.errors import (
    ConfigurationError,
    DivergenceError,
    InputError,
    MetricError,
    ModelFileError,
    ShapeError,
)


def finite_diff_input(model, x, y, h=1e-5):
    fd = np.zeros_like(x)
    for i in range(len(x)):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd[i] = (
            nc.loss_value(model, xp[None, :], y) - nc.loss_value(model, xm[None, :], y)
        ) / (2 * h)
    return fd


def finite_diff_weights(model, x, y, layer, h=1e-5):
    W = model.weights[layer]
    fd = np.zeros_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            orig = W[i, j]
            W[i, j] = orig + h
            lp = nc.loss_value(model, x[None, :], y)
            W[i, j] = orig - h
            lm = nc.loss_value(model, x[None, :], y)
            W[i, j] = orig
            fd[i, j] = (lp - lm) / (2 * h)
    return fd


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)


def two_cluster_data(n=100, seed=1):
    gen = np.random.default_rng(seed)
    x0 = gen.normal([0.25, 0.25], 0.05, (n, 2))
    x1 = gen.normal([0.75, 0.75], 0.05, (n, 2))
    return nc.FeatureMatrix(
        np.vstack([x0, x1]), np.array([0] * n + [1] * n), ["a", "b"]
    )


class TestInit:
    def test_deterministic(self):
        m1 = nc.mlp_init([20, 16, 2], seed=7)
        m2 = nc.mlp_init([20, 16, 2], seed=7)
        for w1, w2 in zip(m1.weights, m2.weights):
            assert w1.tobytes() == w2.tobytes()

    def test_seed_sensitivity(self):
        m1 = nc.mlp_init([20, 16, 2], seed=7)
        m2 = nc.mlp_init([20, 16, 2], seed=8)
        assert not np.array_equal(m1.weights[0], m2.weights[0])

    def test_too_few_layers(self):
        with pytest.raises(ConfigurationError):
            nc.mlp_init([3], seed=0)

    def test_bad_dims(self):
        with pytest.raises(ConfigurationError):
            nc.mlp_init([3, 0, 2], seed=0)

    def test_logistic_head_single_output(self):
        m = nc.mlp_init([4, 2], seed=0)
        assert m.head == "logistic"
        assert m.weights[-1].shape == (1, 4)

    def test_softmax_head_for_multiclass(self):
        m = nc.mlp_init([4, 8, 3], seed=0)
        assert m.head == "softmax"
        assert m.weights[-1].shape == (3, 8)


class TestForward:
    def test_zero_weights_uniform(self):
        m = nc.mlp_init([4, 3, 3], seed=0)
        for w in m.weights:
            w[:] = 0.0
        p = nc.forward(m, np.array([0.3, 0.1, 0.9, 0.5]))
        assert np.allclose(p, 1 / 3)

    def test_zero_logistic_half(self):
        m = nc.mlp_init([1, 2], seed=0)
        m.weights[0][:] = 0.0
        p = nc.forward(m, np.array([0.4]))
        assert p[1] == pytest.approx(0.5)

    def test_matches_scalar_loop_oracle(self):
        # straight-line reimplementation of the forward pass
        m = nc.mlp_init([5, 4, 2], seed=3)
        gen = np.random.default_rng(0)
        x = gen.uniform(0, 1, 5)
        a = x.copy()
        for layer, (W, b) in enumerate(zip(m.weights, m.biases)):
            z = np.array(
                [sum(W[i, j] * a[j] for j in range(W.shape[1])) + b[i] for i in range(W.shape[0])]
            )
            a = np.maximum(z, 0) if layer < len(m.weights) - 1 else z
        p1 = 1 / (1 + np.exp(-a[0]))
        expected = np.array([1 - p1, p1])
        assert np.allclose(nc.forward(m, x), expected, atol=1e-12)

    def test_probabilities_sum_to_one(self):
        gen = np.random.default_rng(4)
        for seed in range(5):
            m = nc.mlp_init([6, 8, 4], seed=seed)
            p = nc.forward_batch(m, gen.uniform(0, 1, (10, 6)))
            assert np.all(p > 0) and np.all(p < 1)
            assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_shape_error(self):
        m = nc.mlp_init([4, 2], seed=0)
        with pytest.raises(ShapeError):
            nc.forward(m, np.zeros(3))

    def test_nonfinite_input(self):
        m = nc.mlp_init([2, 2], seed=0)
        with pytest.raises(InputError):
            nc.forward(m, np.array([np.nan, 0.0]))


class TestGradients:
    def test_input_gradient_matches_fd(self):
        gen = np.random.default_rng(11)
        for seed in range(3):
            m = nc.mlp_init([8, 12, 2], seed=seed)
            x = gen.uniform(0, 1, 8)
            y = np.array([gen.integers(0, 2)])
            grad = nc.input_gradient(m, x, int(y[0]))
            assert rel_err(grad, finite_diff_input(m, x, y)) < 1e-4

    def test_weight_gradient_matches_fd(self):
        gen = np.random.default_rng(12)
        m = nc.mlp_init([5, 6, 3], seed=2)
        x = gen.uniform(0, 1, 5)
        y = np.array([1])
        _, dws, _, _ = nc.loss_gradients(m, x[None, :], y)
        for layer in range(len(m.weights)):
            fd = finite_diff_weights(m, x, y, layer)
            assert rel_err(dws[layer], fd) < 1e-4

    def test_zero_first_layer_zero_gradient(self):
        m = nc.mlp_init([4, 3, 2], seed=0)
        m.weights[0][:] = 0.0
        grad = nc.input_gradient(m, np.array([0.2, 0.4, 0.6, 0.8]), 1)
        assert np.allclose(grad, 0.0)

    def test_logistic_closed_form(self):
        # single-layer logistic: dL/dx = (p - y) * w
        m = nc.mlp_init([3, 2], seed=5)
        x = np.array([0.2, 0.7, 0.4])
        w = m.weights[0][0]
        p = nc.forward(m, x)[1]
        for y in (0, 1):
            grad = nc.input_gradient(m, x, y)
            assert np.allclose(grad, (p - y) * w, atol=1e-12)

    def test_probability_gradient_matches_fd(self):
        m = nc.mlp_init([5, 7, 3], seed=9)
        gen = np.random.default_rng(5)
        x = gen.uniform(0, 1, 5)
        h = 1e-6
        for c in range(3):
            grad = nc.probability_gradient(m, x, c)
            fd = np.zeros(5)
            for i in range(5):
                xp, xm = x.copy(), x.copy()
                xp[i] += h
                xm[i] -= h
                fd[i] = (nc.forward(m, xp)[c] - nc.forward(m, xm)[c]) / (2 * h)
            assert rel_err(grad, fd) < 1e-4


class TestTrain:
    def test_separable_data_high_bac(self):
        data = two_cluster_data()
        model = nc.mlp_init([2, 8, 2], seed=0)
        res = nc.train(model, data, nc.TrainConfig(epochs=200, seed=0))
        assert nc.balanced_accuracy(res.model, data) > 0.95

    def test_loss_decreases(self):
        data = two_cluster_data()
        res = nc.train(
            nc.mlp_init([2, 8, 2], seed=0), data, nc.TrainConfig(epochs=50, seed=0)
        )
        assert res.history[-1] <= res.initial_loss
        assert len(res.history) == 50

    def test_zero_epochs_rejected(self):
        with pytest.raises(ConfigurationError):
            nc.train(
                nc.mlp_init([2, 2], seed=0),
                two_cluster_data(),
                nc.TrainConfig(epochs=0),
            )

    def test_deterministic(self):
        data = two_cluster_data()
        model = nc.mlp_init([2, 8, 2], seed=0)
        cfg = nc.TrainConfig(epochs=30, seed=4)
        r1 = nc.train(model, data, cfg)
        r2 = nc.train(model, data, cfg)
        for w1, w2 in zip(r1.model.weights, r2.model.weights):
            assert np.array_equal(w1, w2)

    def test_does_not_mutate_input_model(self):
        data = two_cluster_data()
        model = nc.mlp_init([2, 4, 2], seed=0)
        before = [w.copy() for w in model.weights]
        nc.train(model, data, nc.TrainConfig(epochs=5, seed=0))
        for w, b in zip(model.weights, before):
            assert np.array_equal(w, b)

    def test_divergence_carries_epoch(self):
        data = two_cluster_data()
        model = nc.mlp_init([2, 4, 4, 2], seed=0)
        cfg = nc.TrainConfig(epochs=10, seed=0, learning_rate=1e150)
        with pytest.raises(DivergenceError) as err:
            nc.train(model, data, cfg)
        assert err.value.epoch >= 0

    def test_softmax_binary_head_supported(self):
        data = two_cluster_data()
        model = nc.mlp_init([2, 8, 2], seed=0, head="softmax")
        res = nc.train(model, data, nc.TrainConfig(epochs=100, seed=0))
        assert nc.balanced_accuracy(res.model, data) > 0.9


class TestBalancedAccuracy:
    def test_perfect(self):
        data = two_cluster_data()
        res = nc.train(
            nc.mlp_init([2, 8, 2], seed=0), data, nc.TrainConfig(epochs=200, seed=0)
        )
        preds = nc.predict_classes(res.model, data.data)
        if np.array_equal(preds, data.labels):
            assert nc.balanced_accuracy(res.model, data) == 1.0

    def test_constant_predictor_half(self):
        m = nc.mlp_init([2, 2], seed=0)
        m.weights[0][:] = 0.0
        m.biases[0][:] = 5.0  # always predicts class 1
        data = two_cluster_data(n=20)
        assert nc.balanced_accuracy(m, data) == pytest.approx(0.5)

    def test_hand_worked_case(self):
        # classes (2,2); predictions hit 2/2 for class 0 and 1/2 for class 1:
        # balanced accuracy = (1.0 + 0.5)/2 = 0.75
        m = nc.mlp_init([1, 2], seed=0)
        m.weights[0][0, 0] = 20.0
        m.biases[0][0] = -10.0  # boundary at x = 0.5
        data = nc.FeatureMatrix(
            np.array([[0.1], [0.2], [0.9], [0.4]]), np.array([0, 0, 1, 1]), ["f"]
        )
        assert nc.balanced_accuracy(m, data) == pytest.approx(0.75)

    def test_missing_class_error(self):
        m = nc.mlp_init([2, 2], seed=0)
        data = nc.FeatureMatrix(np.zeros((3, 2)), np.array([0, 0, 0]), ["a", "b"])
        with pytest.raises(MetricError, match="class 1"):
            nc.balanced_accuracy(m, data)


class TestPersistence:
    def test_round_trip_bit_exact(self, tmp_path):
        data = two_cluster_data()
        res = nc.train(
            nc.mlp_init([2, 5, 2], seed=0), data, nc.TrainConfig(epochs=20, seed=0)
        )
        path = tmp_path / "model.json"
        nc.save_model(res.model, path)
        loaded = nc.load_model(path)
        assert np.array_equal(
            nc.forward_batch(res.model, data.data), nc.forward_batch(loaded, data.data)
        )

    def test_corrupted_header(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ModelFileError):
            nc.load_model(path)

    def test_future_version_rejected(self, tmp_path):
        m = nc.mlp_init([2, 2], seed=0)
        path = tmp_path / "model.json"
        nc.save_model(m, path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFileError, match="version"):
            nc.load_model(path)

    def test_dimension_mismatch(self, tmp_path):
        m = nc.mlp_init([2, 3, 2], seed=0)
        path = tmp_path / "model.json"
        nc.save_model(m, path)
        doc = json.loads(path.read_text())
        doc["layer_dims"] = [2, 4, 2]
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelFileError, match="dimension"):
            nc.load_model(path)

    def test_dataset_round_trip(self, tmp_path):
        data = two_cluster_data(n=10)
        path = tmp_path / "data.csv"
        nc.save_dataset(data, path)
        loaded = nc.load_dataset(path)
        assert np.array_equal(loaded.data, data.data)
        assert np.array_equal(loaded.labels, data.labels)
        assert loaded.feature_names == data.feature_names
