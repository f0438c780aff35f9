"""Pertinent-negative contrastive explanations.

Searches for the smallest additive perturbation delta that flips the model's
predicted class, by projected gradient descent on

    c * max(P_orig(x+delta) - max_{j != orig} P_j(x+delta), -kappa)
      + beta * ||delta||_1 + ||delta||_2^2

with per-step L1 soft-thresholding, gradient clipping, and box projection of
x+delta into [0,1]^d. The trade-off constant c follows a doubling/bisection
schedule. Importance of feature i on success is |x_i - x~_i| scaled by the
feature's training standard deviation, then normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ExplanationError
from ..netcore import MlpModel, _backward, _forward_cache
from .base import Explanation, make_explanation, predicted_class


@dataclass
class CemConfig:
    kappa: float = 0.0
    beta: float = 0.1
    c_init: float = 1.0
    c_steps: int = 10
    max_iterations: int = 1000
    gradient_clip: float = 1000.0
    learning_rate: float = 0.01
    no_info_val: float = -1.0  # kept for config parity; the box bounds already constrain the search
    feature_range: tuple[float, float] = (0.0, 1.0)

    def validate(self):
        if self.beta < 0:
            raise ConfigurationError("beta must be >= 0")
        if self.c_steps < 1:
            raise ConfigurationError("c_steps must be >= 1")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")


@dataclass
class CemResult:
    success: bool
    x_cf: np.ndarray | None
    explanation: Explanation | None
    c_final: float


def _margin_and_grad(model: MlpModel, xp: np.ndarray, orig: int):
    """P_orig - max_other and its input gradient, in one forward/backward."""
    zs, acts, probs = _forward_cache(model, xp[None, :])
    p = probs[0]
    others = np.delete(np.arange(model.n_classes), orig)
    runner = others[np.argmax(p[others])]
    margin = p[orig] - p[runner]
    if model.head == "logistic":
        # d(P1)/dz = p1 (1 - p1); P0 = 1 - P1
        dz = np.array([[p[1] * (1.0 - p[1]) * (1.0 if orig == 1 else -1.0) * 2.0]])
    else:
        onehot = np.zeros(model.n_classes)
        onehot[orig] = 1.0
        onehot[runner] -= 1.0
        # d(P_orig - P_runner)/dz_j = sum_k onehot_k * P_k (1[k=j] - P_j)
        dz = (onehot * p) @ (np.eye(model.n_classes) - p[None, :])
        dz = dz[None, :]
    _, _, dx = _backward(model, zs, acts, dz)
    return margin, dx[0], int(np.argmax(p))


def _elastic_net(delta: np.ndarray, beta: float) -> float:
    return beta * np.abs(delta).sum() + float(delta @ delta)


def cem_pertinent_negative(
    model: MlpModel,
    x: np.ndarray,
    cfg: CemConfig | None = None,
    train_std: np.ndarray | None = None,
) -> CemResult:
    """Search for a pertinent negative; returns a no-solution result on failure.

    `train_std` supplies the per-feature standard deviation used to scale the
    importance of each change (defaults to 1 for every feature).
    """
    cfg = cfg or CemConfig()
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    std = np.ones(d) if train_std is None else np.asarray(train_std, dtype=np.float64)
    if std.shape != (d,):
        raise ConfigurationError(f"train_std must have length {d}")
    lo, hi = cfg.feature_range

    orig = predicted_class(model, x)
    best_delta = None
    best_score = np.inf
    c = cfg.c_init
    c_lo, c_hi = 0.0, np.inf

    for _ in range(cfg.c_steps):
        delta = np.zeros(d)
        flipped_this_round = False
        for _ in range(cfg.max_iterations):
            margin, grad_margin, pred = _margin_and_grad(model, x + delta, orig)
            if pred != orig:
                flipped_this_round = True
                score = _elastic_net(delta, cfg.beta)
                if score < best_score:
                    best_score = score
                    best_delta = delta.copy()
            g = 2.0 * delta
            if margin > -cfg.kappa:
                g = g + c * grad_margin
            np.clip(g, -cfg.gradient_clip, cfg.gradient_clip, out=g)
            delta = delta - cfg.learning_rate * g
            delta = np.sign(delta) * np.maximum(np.abs(delta) - cfg.beta, 0.0)
            delta = np.clip(x + delta, lo, hi) - x
            if not np.all(np.isfinite(delta)):
                raise ExplanationError("CEM optimization produced non-finite values")
        if flipped_this_round:
            c_hi = c
            c = 0.5 * (c_lo + c_hi)
        else:
            c_lo = c
            c = 2.0 * c if np.isinf(c_hi) else 0.5 * (c_lo + c_hi)

    if best_delta is None:
        return CemResult(False, None, None, c)
    x_cf = np.clip(x + best_delta, lo, hi)
    importance = np.abs(x - x_cf) * std
    expl = make_explanation(importance, "cem")
    return CemResult(True, x_cf, expl, c)
