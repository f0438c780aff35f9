import numpy as np
import pytest

from xailab import netcore as nc
from xailab.errors import ConfigurationError
from xailab.robust import (
    AttackConfig,
    adversarial_train,
    attack_batch,
    fgsm_perturb,
    pgd_perturb,
)
from xailab.synthdata import SynthSpec, normalize_minmax, split_stratified, synth_gauss


@pytest.fixture(scope="module")
def gauss_setup():
    data, _, _ = synth_gauss(
        SynthSpec(points_per_cluster=150, separation=0.4, noise=0.15, seed=3)
    )
    data, _ = normalize_minmax(data)
    train, _, test = split_stratified(data, seed=3)
    model = nc.train(
        nc.mlp_init([20, 16, 2], seed=0), train, nc.TrainConfig(epochs=80, seed=0)
    ).model
    return model, train, test


class TestFgsm:
    def test_zero_epsilon_identity(self, gauss_setup):
        model, _, test = gauss_setup
        adv = fgsm_perturb(model, test.data, test.labels, epsilon=0.0)
        assert np.array_equal(adv, test.data)

    def test_budget_and_box(self, gauss_setup):
        model, _, test = gauss_setup
        adv = fgsm_perturb(model, test.data, test.labels, epsilon=0.05)
        assert np.max(np.abs(adv - test.data)) <= 0.05 + 1e-12
        assert adv.min() >= 0.0 and adv.max() <= 1.0

    def test_1d_logistic_gradient_sign(self):
        # w > 0 and y = 1: dL/dx = (p-1) w < 0, so the attack moves x down
        model = nc.mlp_init([1, 2], seed=0)
        model.weights[0][0, 0] = 4.0
        model.biases[0][0] = -2.0
        x = np.array([0.6])
        adv = fgsm_perturb(model, x, 1, epsilon=0.05)
        assert adv[0] == pytest.approx(0.55)
        adv0 = fgsm_perturb(model, x, 0, epsilon=0.05)
        assert adv0[0] == pytest.approx(0.65)

    def test_loss_increases_on_most_instances(self, gauss_setup):
        model, _, test = gauss_setup
        adv = fgsm_perturb(model, test.data, test.labels, epsilon=0.05)
        up = 0
        for i in range(test.n_instances):
            l0 = nc.loss_value(model, test.data[i : i + 1], test.labels[i : i + 1])
            l1 = nc.loss_value(model, adv[i : i + 1], test.labels[i : i + 1])
            up += l1 >= l0
        assert up / test.n_instances >= 0.9


class TestPgd:
    def test_zero_gradient_model_is_identity(self):
        model = nc.mlp_init([3, 4, 2], seed=0)
        model.weights[0][:] = 0.0  # constant model: zero input gradient
        x = np.array([[0.2, 0.5, 0.8]])
        adv = pgd_perturb(model, x, np.array([1]), AttackConfig(method="pgd"))
        assert np.array_equal(adv, x)

    def test_projection_keeps_epsilon_ball(self, gauss_setup):
        model, _, test = gauss_setup
        cfg = AttackConfig(method="pgd", epsilon=0.05, alpha=0.5, iterations=3)
        adv = pgd_perturb(model, test.data, test.labels, cfg)
        assert np.max(np.abs(adv - test.data)) <= 0.05 + 1e-12
        assert adv.min() >= 0.0 and adv.max() <= 1.0

    def test_pgd_at_least_as_strong_as_fgsm(self, gauss_setup):
        model, _, test = gauss_setup
        fgsm_adv = fgsm_perturb(model, test.data, test.labels, epsilon=0.05)
        pgd_adv = pgd_perturb(model, test.data, test.labels, AttackConfig(method="pgd"))
        wins = 0
        for i in range(test.n_instances):
            lf = nc.loss_value(model, fgsm_adv[i : i + 1], test.labels[i : i + 1])
            lp = nc.loss_value(model, pgd_adv[i : i + 1], test.labels[i : i + 1])
            wins += lp >= lf - 1e-12
        assert wins / test.n_instances >= 0.8

    def test_single_step_full_alpha_equals_fgsm(self, gauss_setup):
        model, _, test = gauss_setup
        cfg = AttackConfig(method="pgd", epsilon=0.05, alpha=0.05, iterations=1)
        pgd_adv = pgd_perturb(model, test.data, test.labels, cfg)
        fgsm_adv = fgsm_perturb(model, test.data, test.labels, epsilon=0.05)
        assert np.array_equal(pgd_adv, fgsm_adv)

    def test_config_guards(self):
        with pytest.raises(ConfigurationError):
            AttackConfig(method="pgd", epsilon=-0.1).validate()
        with pytest.raises(ConfigurationError):
            AttackConfig(method="nope").validate()


class TestAdversarialTrain:
    def test_zero_epsilon_equals_duplicate_training(self, gauss_setup):
        _, train, _ = gauss_setup
        init = nc.mlp_init([20, 8, 2], seed=1)
        cfg = nc.TrainConfig(epochs=5, seed=1)
        attack = AttackConfig(method="fgsm", epsilon=0.0)
        adv_res = adversarial_train(init, train, attack, cfg)
        doubled = nc.FeatureMatrix(
            np.vstack([train.data, train.data]),
            np.concatenate([train.labels, train.labels]),
            list(train.feature_names),
        )
        plain_res = nc.train(init, doubled, cfg)
        for wa, wb in zip(adv_res.model.weights, plain_res.model.weights):
            assert np.array_equal(wa, wb)

    def test_robust_model_keeps_clean_accuracy(self, gauss_setup):
        model, train, test = gauss_setup
        init = nc.mlp_init([20, 16, 2], seed=0)
        cfg = nc.TrainConfig(epochs=80, seed=0)
        robust = adversarial_train(init, train, AttackConfig(method="pgd"), cfg).model
        clean = nc.balanced_accuracy(model, test)
        assert nc.balanced_accuracy(robust, test) >= clean - 0.05

    def test_robust_model_beats_undefended_under_pgd(self, gauss_setup):
        model, train, test = gauss_setup
        cfg = nc.TrainConfig(epochs=80, seed=0)
        robust = adversarial_train(
            nc.mlp_init([20, 16, 2], seed=0), train, AttackConfig(method="pgd"), cfg
        ).model
        pgd_cfg = AttackConfig(method="pgd")
        def pgd_bac(m):
            adv = attack_batch(m, test.data, test.labels, pgd_cfg)
            return nc.balanced_accuracy(
                m, nc.FeatureMatrix(adv, test.labels, list(test.feature_names))
            )
        assert pgd_bac(robust) > pgd_bac(model)

    def test_deterministic(self, gauss_setup):
        _, train, _ = gauss_setup
        init = nc.mlp_init([20, 8, 2], seed=2)
        cfg = nc.TrainConfig(epochs=3, seed=2)
        a = adversarial_train(init, train, AttackConfig(method="fgsm"), cfg)
        b = adversarial_train(init, train, AttackConfig(method="fgsm"), cfg)
        for wa, wb in zip(a.model.weights, b.model.weights):
            assert np.array_equal(wa, wb)
