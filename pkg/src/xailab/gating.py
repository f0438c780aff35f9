"""Feature-gating classifier: the explanation is the mask it actually used.

A discriminator network emits one logit per feature; Gumbel-sigmoid sampling
turns the logits into soft gates, which are thresholded into a hard binary
mask. The predictor only ever sees masked inputs, so a feature outside the
mask provably cannot influence the prediction. Training is end-to-end with a
straight-through estimator (hard mask forward, soft gates backward) and an L1
sparsity penalty on the soft gates.

Inference drops the Gumbel noise (gates become sigmoid(a_i / tau)), making
masks and predictions deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, MetricError, ModelFileError
from .explainers.base import Explanation
from .netcore import (
    AdamState,
    FeatureMatrix,
    MlpModel,
    TrainConfig,
    _adam_update,
    _backward,
    _forward_cache,
    forward_batch,
    load_model,
    loss_gradients,
    loss_value,
    mlp_init,
    save_model,
)
from .rng import RngStream, as_generator

GATING_FORMAT_VERSION = 1


@dataclass
class GatingModel:
    discriminator: MlpModel  # linear head, d -> d logits
    predictor: MlpModel      # classifier, d -> classes
    tau: float = 1.0
    threshold: float = 0.5
    l1_weight: float = 0.1

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigurationError("tau must be > 0")
        if not 0 < self.threshold < 1:
            raise ConfigurationError("threshold must lie in (0,1)")
        d = self.predictor.n_features
        if self.discriminator.n_features != d or self.discriminator.layer_dims[-1] != d:
            raise ConfigurationError(
                "discriminator must map the feature space onto per-feature logits"
            )

    @property
    def n_features(self) -> int:
        return self.predictor.n_features

    def copy(self) -> "GatingModel":
        return GatingModel(
            self.discriminator.copy(),
            self.predictor.copy(),
            self.tau,
            self.threshold,
            self.l1_weight,
        )


def gating_init(
    predictor_dims: list[int],
    seed: int,
    hidden_discriminator: list[int] | None = None,
    tau: float = 1.0,
    threshold: float = 0.5,
    l1_weight: float = 0.1,
) -> GatingModel:
    d = predictor_dims[0]
    disc_dims = [d] + list(hidden_discriminator or [max(d, 8)]) + [d]
    disc = mlp_init(disc_dims, seed=seed * 2 + 1, head="linear")
    pred = mlp_init(predictor_dims, seed=seed * 2)
    return GatingModel(disc, pred, tau, threshold, l1_weight)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def gumbel_sigmoid(logit, tau: float, rng) -> np.ndarray:
    """sigmoid((logit + g1 - g2) / tau) with g1, g2 ~ Gumbel(0,1)."""
    if tau <= 0:
        raise ConfigurationError("tau must be > 0")
    gen = as_generator(rng)
    logit = np.asarray(logit, dtype=np.float64)
    u1 = np.clip(gen.random(logit.shape), 1e-12, 1.0 - 1e-12)
    u2 = np.clip(gen.random(logit.shape), 1e-12, 1.0 - 1e-12)
    g1 = -np.log(-np.log(u1))
    g2 = -np.log(-np.log(u2))
    return _sigmoid((logit + g1 - g2) / tau)


@dataclass
class GateOutput:
    probs: np.ndarray
    mask: np.ndarray   # binary, float
    soft: np.ndarray
    all_zero: bool


def _gates(model: GatingModel, X: np.ndarray, mode: str, rng=None):
    logits = forward_batch(model.discriminator, X)
    if mode == "train":
        soft = gumbel_sigmoid(logits, model.tau, rng)
    elif mode == "infer":
        soft = _sigmoid(logits / model.tau)
    else:
        raise ConfigurationError(f"mode must be 'train' or 'infer', got {mode!r}")
    mask = (soft >= model.threshold).astype(np.float64)
    return soft, mask


def fg_forward(model: GatingModel, x: np.ndarray, mode: str = "infer", rng=None) -> GateOutput:
    """Gated prediction for one instance.

    Train mode samples Gumbel-sigmoid gates; infer mode is deterministic.
    The predictor only sees the masked input, so zero-mask features cannot
    move the output. An all-zero mask is flagged, not an error.
    """
    x = np.asarray(x, dtype=np.float64)
    soft, mask = _gates(model, x[None, :], mode, rng)
    probs = forward_batch(model.predictor, x[None, :] * mask)[0]
    return GateOutput(probs, mask[0], soft[0], all_zero=not mask.any())


def fg_batch_gradients(model: GatingModel, X: np.ndarray, y: np.ndarray, soft, mask):
    """Loss and parameter gradients for given gate samples.

    Forward uses the hard mask; the backward pass routes through the soft
    gates (straight-through). Loss is mean cross-entropy plus
    l1_weight * mean(soft).
    """
    zs_d, acts_d, logits = _forward_cache(model.discriminator, X)
    ce, dws_p, dbs_p, d_masked = loss_gradients(model.predictor, X * mask, y)
    penalty = model.l1_weight * float(soft.mean())
    dsoft = d_masked * X + model.l1_weight / soft.size
    dlogits = dsoft * soft * (1.0 - soft) / model.tau
    dws_d, dbs_d, _ = _backward(model.discriminator, zs_d, acts_d, dlogits)
    return ce + penalty, dws_d, dbs_d, dws_p, dbs_p


def fg_train(
    model: GatingModel,
    data: FeatureMatrix,
    cfg: TrainConfig,
    rng=None,
):
    """End-to-end training of discriminator and predictor; seed-deterministic.

    Returns (trained GatingModel, history) where history holds the full-data
    inference-mode loss (cross-entropy + sparsity penalty) after each epoch.
    """
    cfg.validate()
    gen = as_generator(rng) if rng is not None else RngStream(cfg.seed).derive("fg-train").generator
    model = model.copy()
    X, y = data.data, data.labels
    state_d = AdamState(model.discriminator)
    state_p = AdamState(model.predictor)

    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = gen.permutation(len(y))
        for start in range(0, len(y), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            soft, mask = _gates(model, X[idx], "train", gen)
            _, dws_d, dbs_d, dws_p, dbs_p = fg_batch_gradients(
                model, X[idx], y[idx], soft, mask
            )
            _adam_update(model.discriminator, state_d, dws_d, dbs_d, cfg)
            _adam_update(model.predictor, state_p, dws_p, dbs_p, cfg)
        soft, mask = _gates(model, X, "infer")
        epoch_loss = loss_value(model.predictor, X * mask, y) + model.l1_weight * float(
            soft.mean()
        )
        if not np.isfinite(epoch_loss):
            raise DivergenceError(f"gating loss became non-finite at epoch {epoch}", epoch)
        history.append(epoch_loss)
    return model, history


def fg_predict(model: GatingModel, X: np.ndarray) -> np.ndarray:
    """Deterministic gated class probabilities for a batch."""
    _, mask = _gates(model, X, "infer")
    return forward_batch(model.predictor, X * mask)


def fg_balanced_accuracy(model: GatingModel, data: FeatureMatrix) -> float:
    preds = np.argmax(fg_predict(model, data.data), axis=1)
    recalls = []
    for c in range(model.predictor.n_classes):
        sel = data.labels == c
        if not sel.any():
            raise MetricError(f"class {c} has zero instances")
        recalls.append(float(np.mean(preds[sel] == c)))
    return float(np.mean(recalls))


def active_feature_fraction(model: GatingModel, X: np.ndarray) -> float:
    """Mean fraction of features the inference mask activates per instance."""
    _, mask = _gates(model, X, "infer")
    return float(mask.mean())


def fg_explain(model: GatingModel, x: np.ndarray) -> Explanation:
    """The inference-time mask itself: 1 for used features, 0 otherwise."""
    out = fg_forward(model, x, mode="infer")
    return Explanation(
        scores=out.mask.astype(np.float64),
        signed_raw=out.mask.astype(np.float64),
        method="gating",
        warning="all-zero mask" if out.all_zero else None,
    )


def mask_faithfulness_check(model: GatingModel, X: np.ndarray, rng=None) -> float:
    """Fraction of instances whose prediction survives masked-out noise.

    For each instance the inference mask is fixed, every zero-mask feature is
    replaced by a random value, and the masked prediction must be
    bit-identical. This is the gating model's faithfulness guarantee.
    """
    gen = as_generator(rng)
    X = np.asarray(X, dtype=np.float64)
    _, mask = _gates(model, X, "infer")
    perturbed = np.where(mask == 0.0, gen.uniform(size=X.shape), X)
    p0 = forward_batch(model.predictor, X * mask)
    p1 = forward_batch(model.predictor, perturbed * mask)
    return float(np.mean(np.all(p0 == p1, axis=1)))


def save_gating_model(model: GatingModel, prefix: str | Path):
    """Persist as two model files and a small header document."""
    prefix = Path(prefix)
    save_model(model.discriminator, prefix.with_suffix(".disc.json"))
    save_model(model.predictor, prefix.with_suffix(".pred.json"))
    header = {
        "format_version": GATING_FORMAT_VERSION,
        "tau": model.tau,
        "threshold": model.threshold,
        "l1_weight": model.l1_weight,
        "discriminator": prefix.with_suffix(".disc.json").name,
        "predictor": prefix.with_suffix(".pred.json").name,
    }
    prefix.with_suffix(".gating.json").write_text(json.dumps(header, indent=1))


def load_gating_model(prefix: str | Path) -> GatingModel:
    prefix = Path(prefix)
    header = json.loads(prefix.with_suffix(".gating.json").read_text())
    if header.get("format_version") != GATING_FORMAT_VERSION:
        raise ModelFileError(
            f"gating header has format version {header.get('format_version')}, "
            f"this build reads {GATING_FORMAT_VERSION}"
        )
    base = prefix.parent
    return GatingModel(
        load_model(base / header["discriminator"]),
        load_model(base / header["predictor"]),
        float(header["tau"]),
        float(header["threshold"]),
        float(header["l1_weight"]),
    )
