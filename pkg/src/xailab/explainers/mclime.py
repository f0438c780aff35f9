"""Minimal-counterfactual search over LIME's important features.

Starting from the features LIME found relevant, steps singletons, then pairs,
then triples in increments proportional to each feature's training standard
deviation, and returns the first (hence smallest) group whose stepped
modification pushes the target-class probability over the threshold.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..netcore import MlpModel, forward, forward_batch
from .base import Explanation, make_explanation, predicted_class


@dataclass
class McLimeConfig:
    std_fraction: float = 0.5       # step size as a fraction of the feature std
    threshold: float = 0.5          # target-class probability that counts as a flip
    max_group_size: int = 3
    max_candidates: int = 20        # cap on LIME features considered
    max_steps: int = 25             # per-feature step budget within [0,1]

    def validate(self):
        if self.std_fraction <= 0:
            raise ConfigurationError("std_fraction must be > 0")
        if not 0 < self.threshold < 1:
            raise ConfigurationError("threshold must lie in (0,1)")
        if self.max_group_size < 1:
            raise ConfigurationError("max_group_size must be >= 1")


@dataclass
class McLimeResult:
    success: bool
    change_set: tuple[int, ...]
    new_values: np.ndarray | None
    explanation: Explanation | None


def mc_lime(
    model: MlpModel,
    x: np.ndarray,
    lime_expl: Explanation,
    cfg: McLimeConfig | None = None,
    train_std: np.ndarray | None = None,
    target_class: int | None = None,
) -> McLimeResult:
    """Find the minimal feature group whose stepped change flips the prediction.

    Returns an empty change set immediately when the instance already sits on
    the target side of the threshold; a no-solution result when no group of
    size <= max_group_size flips it.
    """
    cfg = cfg or McLimeConfig()
    cfg.validate()
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    std = np.ones(d) if train_std is None else np.asarray(train_std, dtype=np.float64)

    nonzero = np.flatnonzero(lime_expl.scores > 0)
    if nonzero.size == 0:
        raise ConfigurationError("LIME explanation has no nonzero features")
    order = nonzero[np.argsort(-lime_expl.scores[nonzero], kind="stable")]
    candidates = [int(i) for i in order[: cfg.max_candidates]]

    orig = predicted_class(model, x)
    if target_class is None:
        probs = forward(model, x)
        others = np.delete(np.arange(model.n_classes), orig)
        target_class = int(others[np.argmax(probs[others])])

    if forward(model, x)[target_class] >= cfg.threshold:
        expl = make_explanation(np.zeros(d), "mclime")
        return McLimeResult(True, (), x.copy(), expl)

    steps = cfg.std_fraction * std
    # pick each feature's walk direction by a one-step probe
    directions = np.zeros(d)
    for i in candidates:
        if steps[i] == 0:
            continue
        up = x.copy()
        up[i] = min(up[i] + steps[i], 1.0)
        down = x.copy()
        down[i] = max(down[i] - steps[i], 0.0)
        p_up = forward(model, up)[target_class]
        p_down = forward(model, down)[target_class]
        directions[i] = 1.0 if p_up >= p_down else -1.0
    movable = [i for i in candidates if steps[i] > 0]

    for size in range(1, cfg.max_group_size + 1):
        for group in itertools.combinations(movable, size):
            # walk the whole group together, one step at a time
            trial = np.tile(x, (cfg.max_steps, 1))
            for i in group:
                walked = x[i] + directions[i] * steps[i] * np.arange(1, cfg.max_steps + 1)
                trial[:, i] = np.clip(walked, 0.0, 1.0)
            probs = forward_batch(model, trial)[:, target_class]
            hits = np.flatnonzero(probs >= cfg.threshold)
            if hits.size:
                new_x = trial[hits[0]]
                raw = np.zeros(d)
                raw[list(group)] = 1.0
                expl = make_explanation(raw, "mclime")
                return McLimeResult(True, group, new_x, expl)

    return McLimeResult(False, (), None, None)
