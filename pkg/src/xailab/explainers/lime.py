"""Local surrogate explanation by weighted ridge regression.

Perturbs the instance with per-feature Gaussian noise, weights the samples by
an exponential kernel on Euclidean distance, fits a ridge regression to the
model's predicted-class probability, and keeps the K largest-coefficient
features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ExplanationError
from ..netcore import MlpModel, forward_batch
from ..rng import as_generator
from .base import Explanation, make_explanation, predicted_class


@dataclass
class LimeConfig:
    n_samples: int = 5000
    kernel_width: float | None = None  # defaults to 0.75 * sqrt(d)
    max_features: int = 10
    noise_scale: float = 1.0           # multiplies the per-feature train std
    ridge: float = 1.0

    def validate(self, d: int):
        if self.max_features < 1:
            raise ConfigurationError("max_features must be >= 1")
        if self.n_samples < 10 * self.max_features:
            raise ConfigurationError(
                f"n_samples ({self.n_samples}) must be at least 10x max_features "
                f"({self.max_features})"
            )
        if self.kernel_width is not None and self.kernel_width <= 0:
            raise ConfigurationError("kernel_width must be positive")


def lime_explain(
    model: MlpModel,
    x: np.ndarray,
    train_std: np.ndarray,
    cfg: LimeConfig | None = None,
    rng=None,
) -> Explanation:
    cfg = cfg or LimeConfig()
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    cfg.validate(d)
    std = np.asarray(train_std, dtype=np.float64)
    if std.shape != (d,):
        raise ConfigurationError(f"train_std must have length {d}")
    sigma = cfg.kernel_width if cfg.kernel_width is not None else 0.75 * np.sqrt(d)
    gen = as_generator(rng)

    noise = gen.standard_normal((cfg.n_samples, d)) * (cfg.noise_scale * std)
    samples = np.clip(x + noise, 0.0, 1.0)
    target = predicted_class(model, x)
    y = forward_batch(model, samples)[:, target]

    if np.ptp(y) == 0.0:
        return make_explanation(
            np.zeros(d), "lime", warning="model output constant over the neighborhood"
        )

    dist_sq = np.sum((samples - x) ** 2, axis=1)
    w = np.exp(-dist_sq / sigma**2)

    # weighted ridge with unpenalized intercept
    design = np.column_stack([np.ones(cfg.n_samples), samples])
    penalty = np.diag([0.0] + [cfg.ridge] * d)
    dw = design * w[:, None]
    lhs = dw.T @ design + penalty
    rhs = dw.T @ y
    try:
        coef = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ExplanationError(f"LIME normal equations are singular: {exc}") from exc
    beta = coef[1:]

    if cfg.max_features < d:
        keep = np.argsort(-np.abs(beta), kind="stable")[: cfg.max_features]
        sparse = np.zeros(d)
        sparse[keep] = beta[keep]
        beta = sparse
    return make_explanation(beta, "lime")
