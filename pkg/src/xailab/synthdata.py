"""Synthetic dataset generators with known ground-truth explanations.

Two generators:

* Gaussian cluster data: well-separated isotropic clusters whose centers
  differ on a small set of coordinates; the class is the cluster's parity and
  each cluster's offset coordinates are its ground-truth relevant features.
* Logistic data: Bernoulli labels from a sparse linear logit, so the
  generative weights themselves are the ground truth.

Both are pure functions of (spec, seed). Split and min-max utilities live
here too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, SplitError
from .netcore import FeatureMatrix
from .rng import RngStream


@dataclass
class GroundTruthMask:
    """Per-feature relevance, optionally with generative weights.

    `scope` records whether the mask applies to a cluster of instances or to
    a single instance; weights, when present, are nonzero exactly on the
    relevant features.
    """

    relevant: np.ndarray  # bool per feature
    weights: np.ndarray | None = None
    scope: str = "per-cluster"

    def __post_init__(self):
        self.relevant = np.asarray(self.relevant, dtype=bool)
        if not self.relevant.any():
            raise ConfigurationError("mask must flag at least one relevant feature")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != self.relevant.shape:
                raise ConfigurationError("weights length must match relevant length")
            if not np.array_equal(self.weights != 0.0, self.relevant):
                raise ConfigurationError(
                    "weights must be nonzero exactly on relevant features"
                )


@dataclass
class SynthSpec:
    """Parameters of the Gaussian-cluster generator."""

    n_clusters: int = 5
    points_per_cluster: int = 1000
    n_features: int = 20
    relevant_per_cluster: int = 4
    separation: float = 1.0
    noise: float = 0.1
    seed: int = 0

    def validate(self):
        if self.n_clusters < 2:
            raise ConfigurationError("need at least 2 clusters")
        if self.relevant_per_cluster < 1:
            raise ConfigurationError("relevant_per_cluster must be >= 1")
        if self.relevant_per_cluster > self.n_features:
            raise ConfigurationError(
                "relevant_per_cluster cannot exceed n_features"
            )
        if self.points_per_cluster < 1:
            raise ConfigurationError("points_per_cluster must be >= 1")


def synth_gauss(spec: SynthSpec):
    """Isotropic Gaussian clusters with parity labels and per-cluster masks.

    Each cluster center starts from a common base and is shifted by
    +/- separation on `relevant_per_cluster` randomly chosen coordinates;
    those coordinates form the cluster's ground-truth mask. Raises if the
    realized centers are not well separated (pairwise distance >= 3x noise).

    Returns (FeatureMatrix, cluster_ids, masks) where labels in the
    FeatureMatrix are cluster parity (two classes).
    """
    spec.validate()
    gen = RngStream(spec.seed).derive("synth-gauss").generator
    d, k = spec.n_features, spec.relevant_per_cluster

    centers = np.full((spec.n_clusters, d), 0.5)
    masks = []
    for c in range(spec.n_clusters):
        coords = gen.choice(d, size=k, replace=False)
        signs = gen.choice([-1.0, 1.0], size=k)
        centers[c, coords] += signs * spec.separation
        relevant = np.zeros(d, dtype=bool)
        relevant[coords] = True
        masks.append(GroundTruthMask(relevant, scope="per-cluster"))

    dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    off_diag = dists[~np.eye(spec.n_clusters, dtype=bool)]
    if spec.noise > 0 and off_diag.min() < 3.0 * spec.noise:
        raise ConfigurationError(
            f"cluster centers too close for the noise level: min pairwise "
            f"distance {off_diag.min():.4f} < 3 * noise {spec.noise}"
        )

    n = spec.n_clusters * spec.points_per_cluster
    cluster_ids = np.repeat(np.arange(spec.n_clusters), spec.points_per_cluster)
    points = centers[cluster_ids] + spec.noise * gen.standard_normal((n, d))
    labels = cluster_ids % 2
    names = [f"f{i}" for i in range(d)]
    return FeatureMatrix(points, labels, names), cluster_ids, masks


def synth_logistic(
    d: int,
    support: list[int] | np.ndarray,
    n: int,
    noise: float,
    seed: int,
    weight_scale: float = 10.0,
):
    """Bernoulli labels from a sparse linear logit on uniform [0,1] features.

    Labels follow Bernoulli(sigmoid(w.x + b + eps)) with eps ~ N(0, noise^2)
    per instance and w nonzero only on `support`. The intercept centers the
    logit at zero for the mean input so classes stay roughly balanced. The
    returned mask records w, so |w|-ranking recovers the support exactly.
    """
    support = np.asarray(sorted(set(int(i) for i in np.asarray(support).ravel())))
    if support.size == 0:
        raise ConfigurationError("support must be nonempty")
    if support.min() < 0 or support.max() >= d:
        raise ConfigurationError(f"support must lie in [0, {d - 1}]")
    if weight_scale == 0:
        raise ConfigurationError("weight_scale must be nonzero")

    gen = RngStream(seed).derive("synth-logistic").generator
    w = np.zeros(d)
    magnitudes = gen.uniform(0.5, 1.5, size=support.size)
    signs = gen.choice([-1.0, 1.0], size=support.size)
    w[support] = weight_scale * magnitudes * signs
    X = gen.uniform(0.0, 1.0, size=(n, d))
    b = -0.5 * w.sum()
    logits = X @ w + b + (noise * gen.standard_normal(n) if noise > 0 else 0.0)
    p = 1.0 / (1.0 + np.exp(-logits))
    labels = (gen.uniform(size=n) < p).astype(np.int64)

    relevant = np.zeros(d, dtype=bool)
    relevant[support] = True
    mask = GroundTruthMask(relevant, weights=w, scope="per-instance")
    names = [f"f{i}" for i in range(d)]
    return FeatureMatrix(X, labels, names), mask


@dataclass
class MinMaxParams:
    mins: np.ndarray
    maxs: np.ndarray


def normalize_minmax(data: FeatureMatrix) -> tuple[FeatureMatrix, MinMaxParams]:
    """Scale each column to [0,1]; constant columns map to all zeros.

    Returns the per-column (min, max) so held-out data can be transformed
    with the training-set parameters.
    """
    mins = data.data.min(axis=0)
    maxs = data.data.max(axis=0)
    normed = apply_minmax(data, MinMaxParams(mins, maxs))
    return normed, MinMaxParams(mins, maxs)


def apply_minmax(data: FeatureMatrix, params: MinMaxParams) -> FeatureMatrix:
    span = params.maxs - params.mins
    safe = np.where(span == 0.0, 1.0, span)
    scaled = (data.data - params.mins) / safe
    scaled[:, span == 0.0] = 0.0
    return FeatureMatrix(scaled, data.labels.copy(), list(data.feature_names))


def split_stratified_indices(
    labels: np.ndarray,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row indices of a stratified train/val/test partition.

    Within each class the split counts land within one instance of the
    target fractions (largest-remainder rounding after a seeded shuffle).
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"fractions must sum to 1, got {fractions}")
    if min(fractions) < 0:
        raise ConfigurationError(f"fractions must be non-negative, got {fractions}")
    labels = np.asarray(labels)
    gen = RngStream(seed).derive("split").generator
    parts: list[list[int]] = [[], [], []]
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 3:
            raise SplitError(f"class {c} has only {idx.size} instances, need >= 3")
        idx = gen.permutation(idx)
        targets = np.array(fractions) * idx.size
        counts = np.floor(targets).astype(int)
        remainder = targets - counts
        for _ in range(idx.size - counts.sum()):
            j = int(np.argmax(remainder))
            counts[j] += 1
            remainder[j] = -1.0
        offsets = np.concatenate([[0], np.cumsum(counts)])
        for part in range(3):
            parts[part].extend(idx[offsets[part] : offsets[part + 1]].tolist())
    return tuple(np.array(sorted(p), dtype=np.int64) for p in parts)


def split_stratified(
    data: FeatureMatrix,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
):
    """Disjoint, exhaustive (train, val, test) FeatureMatrix split."""
    parts = split_stratified_indices(data.labels, fractions, seed)
    return tuple(data.subset(p) for p in parts)


def save_mask(mask: GroundTruthMask, feature_names: list[str], path: str | Path):
    """Structured-text sidecar: feature name -> {relevant, weight}."""
    doc = {
        "scope": mask.scope,
        "features": {
            name: {
                "relevant": bool(mask.relevant[i]),
                "weight": (None if mask.weights is None else float(mask.weights[i])),
            }
            for i, name in enumerate(feature_names)
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_mask(path: str | Path, feature_names: list[str]) -> GroundTruthMask:
    doc = json.loads(Path(path).read_text())
    feats = doc["features"]
    relevant = np.array([feats[n]["relevant"] for n in feature_names], dtype=bool)
    raw = [feats[n]["weight"] for n in feature_names]
    weights = None if all(v is None for v in raw) else np.array(
        [0.0 if v is None else v for v in raw]
    )
    return GroundTruthMask(relevant, weights=weights, scope=doc.get("scope", "per-cluster"))
