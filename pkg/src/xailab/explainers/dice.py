"""Diverse counterfactual search with determinantal diversity.

Jointly optimizes k candidate instances to flip the model's prediction while
staying close to the original (mean-L1 proximity) and spreading apart from
each other: the diversity bonus is det(K) with K_ij = 1 / (1 + dist(c_i, c_j)).
Candidates are box-projected to [0,1]^d; importance is the fraction of valid
counterfactuals in which a feature moved by more than a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ExplanationError
from ..netcore import MlpModel, batch_input_gradient, forward_batch
from ..rng import as_generator
from .base import Explanation, make_explanation, predicted_class


@dataclass
class DiceConfig:
    k: int = 4
    lambda_proximity: float = 0.5   # weight of the distance-to-x term
    lambda_diversity: float = 1.0   # weight of the det(K) bonus
    max_steps: int = 5000           # optimization budget per counterfactual
    learning_rate: float = 0.05
    change_tolerance: float = 1e-3  # movement below this does not count as a change
    init_noise: float = 0.1

    def validate(self):
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.lambda_proximity < 0 or self.lambda_diversity < 0:
            raise ConfigurationError("lambda weights must be >= 0")


@dataclass
class DiceResult:
    success: bool
    counterfactuals: np.ndarray  # valid ones on success, last iterate otherwise
    explanation: Explanation | None
    n_valid: int


def _mean_l1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b).mean(axis=-1)


def dpp_kernel(candidates: np.ndarray) -> np.ndarray:
    """K_ij = 1 / (1 + mean-L1 distance between candidates i and j)."""
    diffs = _mean_l1(candidates[:, None, :], candidates[None, :, :])
    return 1.0 / (1.0 + diffs)


def dice_counterfactuals(
    model: MlpModel,
    x: np.ndarray,
    cfg: DiceConfig | None = None,
    rng=None,
    target_class: int | None = None,
) -> DiceResult:
    cfg = cfg or DiceConfig()
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    gen = as_generator(rng)

    orig = predicted_class(model, x)
    if target_class is None:
        probs = forward_batch(model, x[None, :])[0]
        others = np.delete(np.arange(model.n_classes), orig)
        target_class = int(others[np.argmax(probs[others])])
    if target_class == orig:
        raise ConfigurationError("target class equals the current prediction")
    targets = np.full(cfg.k, target_class)

    cands = np.clip(
        x[None, :] + cfg.init_noise * gen.uniform(-1.0, 1.0, size=(cfg.k, d)), 0.0, 1.0
    )

    prev_loss = np.inf
    for _ in range(cfg.max_steps):
        grad_y = batch_input_gradient(model, cands, targets) / cfg.k
        grad_prox = (cfg.lambda_proximity / cfg.k) * np.sign(cands - x) / d
        grad_div = np.zeros_like(cands)
        det_k = 1.0
        if cfg.k > 1 and cfg.lambda_diversity > 0:
            kmat = dpp_kernel(cands)
            det_k = float(np.linalg.det(kmat))
            try:
                kinv = np.linalg.inv(kmat)
            except np.linalg.LinAlgError:
                kinv = None  # coincident candidates: det is 0, skip its gradient
            if kinv is not None and np.isfinite(det_k):
                adj = det_k * kinv  # d det / d K, symmetric
                dk = -(kmat**2)     # d K / d dist
                for i in range(cfg.k):
                    signs = np.sign(cands[i][None, :] - cands)  # (k, d)
                    contrib = (adj[i] * dk[i])[:, None] * signs / d
                    contrib[i] = 0.0
                    grad_div[i] = -cfg.lambda_diversity * 2.0 * contrib.sum(axis=0)

        step = grad_y + grad_prox + grad_div
        if not np.all(np.isfinite(step)):
            raise ExplanationError("DiCE optimization produced non-finite gradients")
        cands = np.clip(cands - cfg.learning_rate * step, 0.0, 1.0)

        probs = forward_batch(model, cands)
        p_true = probs[np.arange(cfg.k), targets]
        loss = (
            float(np.mean(-np.log(np.clip(p_true, 1e-12, 1.0))))
            + cfg.lambda_proximity * float(np.mean(_mean_l1(cands, x)))
            - cfg.lambda_diversity * det_k
        )
        if abs(prev_loss - loss) < 1e-9:
            break
        prev_loss = loss

    preds = np.argmax(forward_batch(model, cands), axis=1)
    valid = preds != orig
    if not valid.any():
        return DiceResult(False, cands, None, 0)
    kept = cands[valid]
    changed = np.abs(kept - x) > cfg.change_tolerance
    expl = make_explanation(changed.mean(axis=0), "dice")
    return DiceResult(True, kept, expl, int(valid.sum()))
