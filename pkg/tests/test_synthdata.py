import numpy as np
import pytest

from xailab import netcore as nc
from xailab import synthdata as sd
from xailab.errors import ConfigurationError, SplitError


class TestSynthGauss:
    def test_paper_scale_shape(self):
        # 5 clusters x 1000 points, 20 features, two classes
        data, cluster_ids, masks = sd.synth_gauss(sd.SynthSpec())
        assert data.n_instances == 5000
        assert data.n_features == 20
        assert set(np.unique(data.labels)) == {0, 1}
        assert len(masks) == 5

    def test_zero_noise_points_equal_centers(self):
        spec = sd.SynthSpec(points_per_cluster=10, noise=0.0, seed=1)
        data, cluster_ids, _ = sd.synth_gauss(spec)
        for c in np.unique(cluster_ids):
            rows = data.data[cluster_ids == c]
            assert np.allclose(rows, rows[0])

    def test_deterministic(self):
        a, _, _ = sd.synth_gauss(sd.SynthSpec(points_per_cluster=20, seed=5))
        b, _, _ = sd.synth_gauss(sd.SynthSpec(points_per_cluster=20, seed=5))
        assert np.array_equal(a.data, b.data)

    def test_zero_relevant_rejected(self):
        with pytest.raises(ConfigurationError):
            sd.synth_gauss(sd.SynthSpec(relevant_per_cluster=0))

    def test_masks_mark_offset_coordinates(self):
        spec = sd.SynthSpec(points_per_cluster=5, noise=0.0, seed=2)
        data, cluster_ids, masks = sd.synth_gauss(spec)
        base = np.full(spec.n_features, 0.5)
        for c, mask in enumerate(masks):
            center = data.data[cluster_ids == c][0]
            moved = ~np.isclose(center, base)
            assert np.array_equal(moved, mask.relevant)

    def test_separation_check(self):
        with pytest.raises(ConfigurationError, match="too close"):
            sd.synth_gauss(sd.SynthSpec(separation=0.01, noise=0.5))

    def test_trained_mlp_separates(self):
        spec = sd.SynthSpec(points_per_cluster=100, seed=4)
        data, _, _ = sd.synth_gauss(spec)
        normed, _ = sd.normalize_minmax(data)
        train, _, test = sd.split_stratified(normed, seed=4)
        model = nc.mlp_init([20, 16, 2], seed=0)
        res = nc.train(model, train, nc.TrainConfig(epochs=150, seed=0))
        assert nc.balanced_accuracy(res.model, test) >= 0.95


class TestSynthLogistic:
    def test_support_recovered_by_weight_ranking(self):
        support = [2, 5, 11]
        _, mask = sd.synth_logistic(d=16, support=support, n=50, noise=0.1, seed=0)
        top = np.argsort(-np.abs(mask.weights))[: len(support)]
        assert sorted(top) == support

    def test_empty_support_rejected(self):
        with pytest.raises(ConfigurationError):
            sd.synth_logistic(d=8, support=[], n=10, noise=0.0, seed=0)

    def test_zero_weights_rejected(self):
        with pytest.raises(ConfigurationError):
            sd.synth_logistic(
                d=4, support=[0, 1, 2, 3], n=10, noise=0.0, seed=0, weight_scale=0.0
            )

    def test_near_deterministic_labels_trainable(self):
        data, _ = sd.synth_logistic(
            d=10, support=[0, 1, 2], n=1500, noise=0.0, seed=3, weight_scale=30.0
        )
        normed, _ = sd.normalize_minmax(data)
        model = nc.mlp_init([10, 16, 2], seed=0)
        res = nc.train(model, normed, nc.TrainConfig(epochs=200, seed=0))
        assert nc.balanced_accuracy(res.model, normed) > 0.93

    def test_mask_invariant(self):
        _, mask = sd.synth_logistic(d=6, support=[1, 4], n=20, noise=0.0, seed=0)
        assert np.array_equal(mask.weights != 0, mask.relevant)


class TestNormalizeMinmax:
    def test_basic_column(self):
        fm = nc.FeatureMatrix(np.array([[2.0], [4.0], [6.0]]), np.zeros(3, int), ["f"])
        normed, params = sd.normalize_minmax(fm)
        assert np.allclose(normed.data[:, 0], [0.0, 0.5, 1.0])
        assert params.mins[0] == 2.0 and params.maxs[0] == 6.0

    def test_constant_column_maps_to_zero(self):
        fm = nc.FeatureMatrix(np.array([[5.0], [5.0]]), np.zeros(2, int), ["f"])
        normed, _ = sd.normalize_minmax(fm)
        assert np.all(normed.data == 0.0)

    def test_reapplying_params_is_identity(self):
        gen = np.random.default_rng(0)
        fm = nc.FeatureMatrix(gen.normal(size=(20, 4)), np.zeros(20, int), list("abcd"))
        normed, params = sd.normalize_minmax(fm)
        again = sd.apply_minmax(fm, params)
        assert np.array_equal(normed.data, again.data)

    def test_columns_span_unit_interval(self):
        gen = np.random.default_rng(1)
        fm = nc.FeatureMatrix(gen.normal(size=(50, 6)) * 10, np.zeros(50, int), list("abcdef"))
        normed, _ = sd.normalize_minmax(fm)
        assert np.allclose(normed.data.min(axis=0), 0.0)
        assert np.allclose(normed.data.max(axis=0), 1.0)


class TestSplitStratified:
    def _data(self, n0, n1, seed=0):
        gen = np.random.default_rng(seed)
        return nc.FeatureMatrix(
            gen.uniform(size=(n0 + n1, 3)),
            np.array([0] * n0 + [1] * n1),
            ["a", "b", "c"],
        )

    def test_counts_within_one_instance(self):
        data = self._data(300, 700)
        train, val, test = sd.split_stratified(data, seed=0)
        for split, frac in ((train, 0.8), (val, 0.1), (test, 0.1)):
            for c, n_class in ((0, 300), (1, 700)):
                got = int(np.sum(split.labels == c))
                assert abs(got - frac * n_class) <= 1

    def test_partitions_disjoint_exhaustive(self):
        data = self._data(40, 60)
        idx = sd.split_stratified_indices(data.labels, seed=1)
        flat = np.concatenate(idx)
        assert len(flat) == 100
        assert len(np.unique(flat)) == 100

    def test_deterministic(self):
        data = self._data(30, 30)
        a = sd.split_stratified_indices(data.labels, seed=3)
        b = sd.split_stratified_indices(data.labels, seed=3)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_bad_fractions(self):
        data = self._data(10, 10)
        with pytest.raises(ConfigurationError):
            sd.split_stratified(data, fractions=(0.5, 0.5, 0.1))

    def test_small_class_error_names_class(self):
        data = self._data(2, 30)
        with pytest.raises(SplitError, match="class 0"):
            sd.split_stratified(data)


class TestMaskPersistence:
    def test_round_trip(self, tmp_path):
        _, mask = sd.synth_logistic(d=5, support=[1, 3], n=10, noise=0.0, seed=0)
        names = [f"f{i}" for i in range(5)]
        path = tmp_path / "mask.json"
        sd.save_mask(mask, names, path)
        loaded = sd.load_mask(path, names)
        assert np.array_equal(loaded.relevant, mask.relevant)
        assert np.allclose(loaded.weights, mask.weights)

    def test_relevant_only_round_trip(self, tmp_path):
        mask = sd.GroundTruthMask(np.array([True, False, True]))
        names = ["a", "b", "c"]
        path = tmp_path / "mask.json"
        sd.save_mask(mask, names, path)
        loaded = sd.load_mask(path, names)
        assert loaded.weights is None
        assert np.array_equal(loaded.relevant, mask.relevant)
