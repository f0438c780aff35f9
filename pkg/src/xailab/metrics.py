"""Disagreement, faithfulness, and variance metrics over explanations.

All functions consume normalized importance scores (or Explanation objects)
and are pure; pairwise matrices are symmetric with the metric's natural
diagonal. Ties in top-k selections break by ascending feature index so that
results are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, MetricError, NumericError
from .explainers.base import Explanation
from .synthdata import GroundTruthMask

SELECTION_EPS = 1e-6  # a score above this counts as "feature selected"


def _scores(e) -> np.ndarray:
    if isinstance(e, Explanation):
        return np.asarray(e.scores, dtype=np.float64)
    return np.asarray(e, dtype=np.float64)


def _ranks(v: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based), ties replaced by their average rank."""
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    ranks[order] = np.arange(1, len(v) + 1)
    for value in np.unique(v):
        sel = v == value
        if sel.sum() > 1:
            ranks[sel] = ranks[sel].mean()
    return ranks


def spearman_rho(e1, e2) -> float:
    """Pearson correlation of the two score rankings."""
    a, b = _scores(e1), _scores(e2)
    if a.shape != b.shape or a.size < 2:
        raise ConfigurationError("inputs must share a length of at least 2")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise MetricError("rank correlation is undefined for a constant vector")
    ra, rb = _ranks(a), _ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    return float((ra @ rb) / np.sqrt((ra @ ra) * (rb @ rb)))


def jensen_shannon_distance(e1, e2) -> float:
    """Square root of the base-2 Jensen-Shannon divergence; bounded by 1.

    Score vectors are renormalized to distributions; an all-zero vector is
    treated as uniform.
    """
    a, b = _scores(e1), _scores(e2)
    if a.shape != b.shape:
        raise ConfigurationError("inputs must have equal length")
    if (a < 0).any() or (b < 0).any():
        raise ConfigurationError("scores must be non-negative")

    def _dist(v):
        total = v.sum()
        return np.full_like(v, 1.0 / len(v)) if total == 0 else v / total

    p, q = _dist(a), _dist(b)
    m = 0.5 * (p + q)

    def _kl(u, w):
        sel = u > 0
        return float(np.sum(u[sel] * np.log2(u[sel] / w[sel])))

    js = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    return float(np.sqrt(max(js, 0.0)))


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores; ties break by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:k]


def jaccard_topk(e1, e2, k: int) -> float:
    a, b = _scores(e1), _scores(e2)
    if k == 0:
        raise ConfigurationError("k must be >= 1")
    if k < 0 or k > a.size:
        raise ConfigurationError(f"k must lie in [1, {a.size}]")
    if a.shape != b.shape:
        raise ConfigurationError("inputs must have equal length")
    sa, sb = set(top_k_indices(a, k)), set(top_k_indices(b, k))
    return len(sa & sb) / len(sa | sb)


@dataclass
class PcaResult:
    coords: np.ndarray                 # (n, n_components)
    explained_variance_ratio: np.ndarray
    components: np.ndarray             # (n_components, d)
    mean: np.ndarray


def pca_project(
    matrix: np.ndarray,
    n_components: int = 2,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> PcaResult:
    """Principal components via power iteration with deflation.

    Components are sign-fixed so each one's largest-magnitude entry is
    positive. Ratios are eigenvalues over the total variance (zero when the
    data carries no variance at all).
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ConfigurationError("need a matrix with at least 2 rows")
    n, d = X.shape
    n_components = min(n_components, d)
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    total = float(np.trace(cov))

    gen = np.random.default_rng(0)  # fixed start; results are deterministic
    comps, eigvals = [], []
    work = cov.copy()
    exhausted = 1e-13 * max(total, 1.0)  # deflation residue is spectrum noise
    for _ in range(n_components):
        v = gen.standard_normal(d)
        v /= np.linalg.norm(v)
        for _ in range(max_iter):
            wv = work @ v
            norm = np.linalg.norm(wv)
            if norm <= exhausted:  # spectrum used up: any unit vector works
                break
            v_new = wv / norm
            if np.linalg.norm(v_new - v) < tol:
                v = v_new
                break
            v = v_new
        else:
            raise NumericError("power iteration did not converge")
        lam = float(v @ work @ v)
        peak = np.argmax(np.abs(v))
        if v[peak] < 0:
            v = -v
        comps.append(v)
        eigvals.append(max(lam, 0.0))
        work = work - lam * np.outer(v, v)

    components = np.array(comps)
    ratios = (
        np.zeros(n_components) if total == 0 else np.array(eigvals) / total
    )
    coords = centered @ components.T
    return PcaResult(coords, ratios, components, mean)


def faithfulness(e, gt: GroundTruthMask, k: int) -> dict[str, float]:
    """FA / RA / PRA / GTA between an explanation and a ground-truth mask.

    RA and PRA need a ground-truth ordering and therefore require weights;
    without weights FA compares the explanation's top-k against the relevant
    set. GTA is per-feature selection agreement over all features, where a
    score above a small epsilon counts as selected.
    """
    scores = _scores(e)
    d = scores.size
    if k > d:
        raise ConfigurationError(f"k ({k}) exceeds the number of features ({d})")
    if k < 1:
        raise ConfigurationError("k must be >= 1")

    top_e = top_k_indices(scores, k)
    selected = scores > SELECTION_EPS
    gta = float(np.mean(selected == gt.relevant))

    if gt.weights is None:
        fa = len(set(top_e) & set(np.flatnonzero(gt.relevant))) / k
        return {"FA": fa, "RA": float("nan"), "PRA": float("nan"), "GTA": gta}

    gt_mag = np.abs(gt.weights)
    top_g = top_k_indices(gt_mag, k)
    fa = len(set(top_e) & set(top_g)) / k
    ra = float(np.mean(top_e == top_g))

    agree = 0
    total = 0
    for i in range(d):
        for j in range(i + 1, d):
            de = scores[i] - scores[j]
            dg = gt_mag[i] - gt_mag[j]
            if np.sign(de) == np.sign(dg):
                agree += 1
            total += 1
    pra = agree / total if total else float("nan")
    return {"FA": fa, "RA": ra, "PRA": pra, "GTA": gta}


@dataclass
class VarianceProfile:
    per_feature_std: np.ndarray
    median: float
    q1: float
    q3: float
    n_above_threshold: int
    threshold: float


def importance_variance(explanations, threshold: float = 0.01) -> VarianceProfile:
    """Per-feature sample std of importance scores across runs (ddof=1)."""
    rows = [_scores(e) for e in explanations]
    if len(rows) < 2:
        raise ConfigurationError("need at least 2 explanations")
    mat = np.vstack(rows)
    stds = mat.std(axis=0, ddof=1)
    return VarianceProfile(
        per_feature_std=stds,
        median=float(np.median(stds)),
        q1=float(np.quantile(stds, 0.25)),
        q3=float(np.quantile(stds, 0.75)),
        n_above_threshold=int(np.sum(stds >= threshold)),
        threshold=threshold,
    )


def important_feature_fraction(explanations, threshold: float = 0.01) -> float:
    """Fraction of features whose mean importance reaches the threshold."""
    rows = [_scores(e) for e in explanations]
    if not rows:
        raise ConfigurationError("need at least 1 explanation")
    mean = np.vstack(rows).mean(axis=0)
    return float(np.mean(mean >= threshold))


@dataclass
class PairwiseMatrix:
    methods: list[str]
    matrix: np.ndarray
    metric: str


def pairwise_matrix(
    explanations_by_method: dict[str, list],
    metric: str,
    k: int | None = None,
) -> PairwiseMatrix:
    """Mean pairwise metric across aligned instance lists, per method pair.

    `metric` is one of "spearman", "jsd", "jaccard" (jaccard needs k). The
    diagonal carries metric(self, self): 1 for spearman/jaccard, 0 for jsd.
    """
    methods = list(explanations_by_method)
    lists = [explanations_by_method[m] for m in methods]
    lengths = {len(l) for l in lists}
    if len(lengths) != 1:
        raise ConfigurationError("all methods must explain the same instances")

    def _pair(a, b) -> float:
        if metric == "spearman":
            return spearman_rho(a, b)
        if metric == "jsd":
            return jensen_shannon_distance(a, b)
        if metric == "jaccard":
            if k is None:
                raise ConfigurationError("jaccard matrix needs k")
            return jaccard_topk(a, b, k)
        raise ConfigurationError(f"unknown metric {metric!r}")

    m = len(methods)
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            vals = [_pair(a, b) for a, b in zip(lists[i], lists[j])]
            out[i, j] = out[j, i] = float(np.mean(vals))
    return PairwiseMatrix(methods, out, metric)
