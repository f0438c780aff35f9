"""Gradient-sign attacks and adversarial training.

FGSM takes a single epsilon-scaled step along the sign of the input-loss
gradient; PGD iterates smaller steps, projecting back into the epsilon ball
around the clean point and into the [0,1] box after every step. Adversarial
training regenerates attack points from the current model each epoch and
trains on the union of clean and adversarial batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .netcore import (
    AdamState,
    FeatureMatrix,
    MlpModel,
    TrainConfig,
    TrainResult,
    batch_input_gradient,
    loss_value,
    train_one_epoch,
)
from .rng import RngStream


@dataclass
class AttackConfig:
    method: str = "pgd"        # "fgsm" | "pgd"
    epsilon: float = 0.05
    alpha: float = 0.01        # PGD step size
    iterations: int = 40       # PGD steps
    clip: tuple[float, float] = (0.0, 1.0)

    def validate(self):
        if self.method not in ("fgsm", "pgd"):
            raise ConfigurationError(f"unknown attack method {self.method!r}")
        if self.epsilon < 0:
            raise ConfigurationError("epsilon must be >= 0")
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be > 0")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")


def _as_batch(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    return (x[None, :] if squeeze else x), squeeze


def fgsm_perturb(model: MlpModel, x: np.ndarray, y, epsilon: float) -> np.ndarray:
    """x + epsilon * sign(dL/dx), clipped to [0,1]; inf-norm change <= epsilon."""
    X, squeeze = _as_batch(x)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    grad = batch_input_gradient(model, X, y)
    adv = np.clip(X + epsilon * np.sign(grad), 0.0, 1.0)
    return adv[0] if squeeze else adv


def pgd_perturb(model: MlpModel, x: np.ndarray, y, cfg: AttackConfig) -> np.ndarray:
    """Iterated sign-gradient ascent inside the epsilon ball and the box."""
    cfg.validate()
    X0, squeeze = _as_batch(x)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    lo, hi = cfg.clip
    X = X0.copy()
    for _ in range(cfg.iterations):
        grad = batch_input_gradient(model, X, y)
        X = X + cfg.alpha * np.sign(grad)
        X = np.clip(X, X0 - cfg.epsilon, X0 + cfg.epsilon)
        X = np.clip(X, lo, hi)
    return X[0] if squeeze else X


def attack_batch(model: MlpModel, X: np.ndarray, y: np.ndarray, cfg: AttackConfig) -> np.ndarray:
    cfg.validate()
    if cfg.method == "fgsm":
        return fgsm_perturb(model, X, y, cfg.epsilon)
    return pgd_perturb(model, X, y, cfg)


def adversarial_accuracy(model: MlpModel, data: FeatureMatrix, cfg: AttackConfig) -> float:
    """Balanced accuracy on attacked inputs (labels unchanged)."""
    from .netcore import balanced_accuracy

    adv = attack_batch(model, data.data, data.labels, cfg)
    return balanced_accuracy(
        model, FeatureMatrix(adv, data.labels, list(data.feature_names))
    )


def adversarial_train(
    model: MlpModel,
    data: FeatureMatrix,
    attack: AttackConfig,
    cfg: TrainConfig,
) -> TrainResult:
    """Train on clean + adversarial points, regenerating attacks every epoch.

    Adversarial points inherit the clean instance's label. The update loop and
    rng consumption match `netcore.train`, so with epsilon = 0 the run is
    identical to plain training on the duplicated dataset.
    """
    cfg.validate()
    attack.validate()
    y = data.labels
    X = data.data

    model = model.copy()
    state = AdamState(model)
    gen = RngStream(cfg.seed).derive("train").generator
    y_aug = np.concatenate([y, y])
    initial_loss = loss_value(model, np.vstack([X, X]), y_aug)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        adv = attack_batch(model, X, y, attack)
        X_aug = np.vstack([X, adv])
        train_one_epoch(model, X_aug, y_aug, cfg, state, gen)
        epoch_loss = loss_value(model, X_aug, y_aug)
        if not np.isfinite(epoch_loss):
            raise DivergenceError(f"loss became non-finite at epoch {epoch}", epoch)
        history.append(epoch_loss)
    return TrainResult(model, history, initial_loss)
