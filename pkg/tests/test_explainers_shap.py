import math

import numpy as np
import pytest

from xailab import netcore as nc
from xailab.errors import ConfigurationError, RefusalError
from xailab.explainers import (
    ShapConfig,
    exact_shapley,
    kernel_weight,
    kernelshap_explain,
    permshap_explain,
)
from xailab.rng import RngStream


def random_model(d, seed=0, hidden=10):
    return nc.mlp_init([d, hidden, 2], seed=seed)


def predicted_prob(model, x):
    p = nc.forward(model, x)
    return p[int(np.argmax(p))]


class TestKernelWeight:
    def test_hand_evaluated_m3(self):
        # (3-1) / (C(3,1) * 1 * 2) = 2/6
        assert kernel_weight(3, 1) == pytest.approx(1 / 3)

    def test_symmetry_in_coalition_size(self):
        for m in (4, 6, 9):
            for s in range(1, m):
                assert kernel_weight(m, s) == pytest.approx(kernel_weight(m, m - s))

    def test_rejects_degenerate_sizes(self):
        with pytest.raises(ConfigurationError):
            kernel_weight(5, 0)
        with pytest.raises(ConfigurationError):
            kernel_weight(5, 5)


class TestExactShapley:
    def test_efficiency(self):
        model = random_model(6, seed=1)
        gen = np.random.default_rng(0)
        x = gen.uniform(0, 1, 6)
        bg = np.full(6, 0.5)
        e = exact_shapley(model, x, bg)
        target = int(np.argmax(nc.forward(model, x)))
        gap = nc.forward(model, x)[target] - nc.forward(model, bg)[target]
        assert e.signed_raw.sum() == pytest.approx(gap, abs=1e-9)

    def test_symmetry_of_exchangeable_features(self):
        # two features wired identically receive equal attribution
        model = random_model(4, seed=2)
        model.weights[0][:, 1] = model.weights[0][:, 0]
        x = np.array([0.8, 0.8, 0.3, 0.6])
        bg = np.full(4, 0.2)
        e = exact_shapley(model, x, bg)
        assert e.signed_raw[0] == pytest.approx(e.signed_raw[1], abs=1e-9)

    def test_dummy_feature_zero(self):
        model = random_model(5, seed=3)
        model.weights[0][:, 2] = 0.0
        gen = np.random.default_rng(1)
        e = exact_shapley(model, gen.uniform(0, 1, 5), np.full(5, 0.5))
        assert abs(e.signed_raw[2]) < 1e-12

    def test_refuses_large_d(self):
        model = random_model(13, seed=0)
        with pytest.raises(RefusalError):
            exact_shapley(model, np.zeros(13), np.zeros(13))


class TestKernelShap:
    @pytest.mark.parametrize("d", [4, 6, 8])
    def test_full_enumeration_equals_exact(self, d):
        model = random_model(d, seed=d)
        gen = np.random.default_rng(d)
        x = gen.uniform(0, 1, d)
        bg = gen.uniform(0, 1, d)
        exact = exact_shapley(model, x, bg)
        ks = kernelshap_explain(model, x, bg, ShapConfig(enumerate_all=True))
        assert np.max(np.abs(exact.signed_raw - ks.signed_raw)) < 1e-6

    def test_constant_model_all_zero(self):
        model = random_model(4, seed=1)
        model.weights[0][:] = 0.0
        e = kernelshap_explain(
            model, np.array([0.1, 0.5, 0.9, 0.3]), np.full(4, 0.5),
            ShapConfig(enumerate_all=True),
        )
        assert np.allclose(e.signed_raw, 0.0, atol=1e-12)
        assert np.all(e.scores == 0.0)

    def test_d1_rejected(self):
        model = random_model(1, seed=0)
        with pytest.raises(ConfigurationError):
            kernelshap_explain(model, np.array([0.5]), np.array([0.2]))

    def test_sampled_close_to_exact(self):
        model = random_model(8, seed=5)
        gen = np.random.default_rng(5)
        x = gen.uniform(0, 1, 8)
        bg = np.full(8, 0.5)
        exact = exact_shapley(model, x, bg)
        ks = kernelshap_explain(model, x, bg, ShapConfig(n_samples=150), RngStream(0))
        assert np.max(np.abs(exact.signed_raw - ks.signed_raw)) < 0.02

    def test_distributional_background(self):
        model = random_model(5, seed=6)
        gen = np.random.default_rng(6)
        x = gen.uniform(0, 1, 5)
        bg_rows = gen.uniform(0, 1, (16, 5))
        e = kernelshap_explain(model, x, bg_rows, ShapConfig(enumerate_all=True))
        assert e.scores.shape == (5,)
        assert np.all((e.scores >= 0) & (e.scores <= 1))

    def test_seeded_runs_reproducible(self):
        model = random_model(10, seed=7)
        x = np.linspace(0.1, 0.9, 10)
        bg = np.full(10, 0.5)
        a = kernelshap_explain(model, x, bg, ShapConfig(n_samples=100), RngStream(3))
        b = kernelshap_explain(model, x, bg, ShapConfig(n_samples=100), RngStream(3))
        assert np.array_equal(a.signed_raw, b.signed_raw)


class TestPermShap:
    @pytest.mark.parametrize("d", [3, 4, 5])
    def test_exhaustive_equals_exact(self, d):
        model = random_model(d, seed=d + 10)
        gen = np.random.default_rng(d)
        x = gen.uniform(0, 1, d)
        bg = gen.uniform(0, 1, d)
        exact = exact_shapley(model, x, bg)
        ps = permshap_explain(model, x, bg, n_permutations=None)
        assert np.max(np.abs(exact.signed_raw - ps.signed_raw)) < 1e-6

    def test_additive_model_single_permutation(self):
        # one-layer logistic model is additive in its logit; a single
        # permutation pair already satisfies efficiency exactly
        model = nc.mlp_init([4, 2], seed=3)
        gen = np.random.default_rng(2)
        x = gen.uniform(0, 1, 4)
        bg = np.full(4, 0.5)
        e = permshap_explain(model, x, bg, n_permutations=1, rng=RngStream(0))
        target = int(np.argmax(nc.forward(model, x)))
        gap = nc.forward(model, x)[target] - nc.forward(model, bg)[target]
        assert e.signed_raw.sum() == pytest.approx(gap, abs=1e-9)

    def test_antithetic_pair_efficiency(self):
        model = random_model(6, seed=9)
        gen = np.random.default_rng(9)
        x = gen.uniform(0, 1, 6)
        bg = np.full(6, 0.5)
        for n in (1, 3, 10):
            e = permshap_explain(model, x, bg, n_permutations=n, rng=RngStream(n))
            target = int(np.argmax(nc.forward(model, x)))
            gap = nc.forward(model, x)[target] - nc.forward(model, bg)[target]
            assert e.signed_raw.sum() == pytest.approx(gap, abs=1e-9)

    def test_bad_permutation_count(self):
        model = random_model(3, seed=0)
        with pytest.raises(ConfigurationError):
            permshap_explain(model, np.zeros(3), np.zeros(3), n_permutations=0)

    def test_exhaustive_guard(self):
        model = random_model(9, seed=0)
        with pytest.raises(RefusalError):
            permshap_explain(model, np.zeros(9), np.zeros(9), n_permutations=None)
