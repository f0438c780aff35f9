"""Shared explanation container and score normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..netcore import MlpModel, forward


@dataclass
class Explanation:
    """Per-feature importance for one instance.

    `scores` are normalized to [0,1] with max 1 (all zeros when the method
    found nothing); `signed_raw` keeps the method's raw attribution where a
    sign is defined. `warning` flags degenerate-but-valid outputs such as a
    zero-variance LIME neighborhood.
    """

    scores: np.ndarray
    signed_raw: np.ndarray
    method: str
    instance_id: int = -1
    seed: int = 0
    warning: str | None = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.signed_raw = np.asarray(self.signed_raw, dtype=np.float64)

    @property
    def n_features(self) -> int:
        return self.scores.shape[0]


def normalize_importance(raw: np.ndarray) -> np.ndarray:
    """Scale |raw| to [0,1] by its max; an all-zero input stays all zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise InputError("importance values must be finite")
    mags = np.abs(raw)
    peak = mags.max() if mags.size else 0.0
    if peak == 0.0:
        return np.zeros_like(mags)
    return mags / peak


def make_explanation(
    signed_raw: np.ndarray,
    method: str,
    instance_id: int = -1,
    seed: int = 0,
    warning: str | None = None,
) -> Explanation:
    return Explanation(
        scores=normalize_importance(signed_raw),
        signed_raw=np.asarray(signed_raw, dtype=np.float64),
        method=method,
        instance_id=instance_id,
        seed=seed,
        warning=warning,
    )


def predicted_class(model: MlpModel, x: np.ndarray) -> int:
    return int(np.argmax(forward(model, x)))
