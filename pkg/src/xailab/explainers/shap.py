"""Shapley-value attribution: exact oracle, kernel regression, permutations.

All three share one value function: v(S) is the model's probability for the
instance's predicted class when features outside S are replaced by background
values. With a single background reference, full coalition enumeration and
exhaustive permutation walks are both exactly the Shapley value, which the
tests exploit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ExplanationError, RefusalError
from ..netcore import MlpModel, forward_batch
from ..rng import as_generator
from .base import Explanation, make_explanation, predicted_class


@dataclass
class ShapConfig:
    n_samples: int = 2048     # coalition budget for the kernel method
    enumerate_all: bool = False


def kernel_weight(m: int, s: int) -> float:
    """Shapley-compliant coalition weight (m-1) / (C(m,s) * s * (m-s))."""
    if s <= 0 or s >= m:
        raise ConfigurationError("kernel weight is defined for 0 < |z| < m only")
    return (m - 1) / (math.comb(m, s) * s * (m - s))


def _background_rows(background: np.ndarray, d: int) -> np.ndarray:
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim == 1:
        bg = bg[None, :]
    if bg.ndim != 2 or bg.shape[1] != d:
        raise ConfigurationError(
            f"background must be a length-{d} vector or a matrix with {d} columns"
        )
    return bg


def _coalition_values(
    model: MlpModel, x: np.ndarray, bg: np.ndarray, masks: np.ndarray, target: int
) -> np.ndarray:
    """v(S) for each binary mask row; masked-out features take background values.

    With a multi-row background the value is the mean over its rows.
    """
    n_masks, d = masks.shape
    n_bg = bg.shape[0]
    # (n_masks, n_bg, d): x where the mask keeps it, background otherwise
    tiled = np.where(masks[:, None, :], x[None, None, :], bg[None, :, :])
    probs = forward_batch(model, tiled.reshape(n_masks * n_bg, d))[:, target]
    return probs.reshape(n_masks, n_bg).mean(axis=1)


def exact_shapley(
    model: MlpModel, x: np.ndarray, background: np.ndarray
) -> Explanation:
    """Exact Shapley values over all 2^d coalitions. Guarded to d <= 12."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if d > 12:
        raise RefusalError(f"exact Shapley is exponential; refusing d={d} > 12")
    bg = _background_rows(background, d)
    target = predicted_class(model, x)

    masks = np.array(
        [[(m >> i) & 1 for i in range(d)] for m in range(1 << d)], dtype=bool
    )
    values = _coalition_values(model, x, bg, masks, target)

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    for m in range(1 << d):
        s = bin(m).count("1")
        w = fact[s] * fact[d - s - 1] / fact[d]
        for i in range(d):
            if not (m >> i) & 1:
                phi[i] += w * (values[m | (1 << i)] - values[m])
    expl = make_explanation(phi, "exact_shapley")
    return expl


def kernelshap_explain(
    model: MlpModel,
    x: np.ndarray,
    background: np.ndarray,
    cfg: ShapConfig | None = None,
    rng=None,
) -> Explanation:
    """Shapley estimation by kernel-weighted least squares on coalitions.

    Solves the weighted regression over sampled (or fully enumerated)
    coalition vectors, excluding the infinite-weight empty/full coalitions
    and enforcing efficiency: the attributions sum to f(x) - f(background).
    """
    cfg = cfg or ShapConfig()
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if d < 2:
        raise ConfigurationError("kernel SHAP needs at least 2 features")
    bg = _background_rows(background, d)
    gen = as_generator(rng)
    target = predicted_class(model, x)

    n_all = (1 << d) - 2
    if cfg.enumerate_all or n_all <= cfg.n_samples:
        masks = np.array(
            [[(m >> i) & 1 for i in range(d)] for m in range(1, (1 << d) - 1)],
            dtype=bool,
        )
        weights = np.array([kernel_weight(d, int(r.sum())) for r in masks])
    else:
        # sample coalition sizes proportionally to their total kernel mass,
        # then uniform subsets of that size; the induced distribution already
        # carries the kernel, so the regression weights are uniform
        sizes = np.arange(1, d)
        mass = np.array([kernel_weight(d, int(s)) * math.comb(d, int(s)) for s in sizes])
        mass /= mass.sum()
        drawn = gen.choice(sizes, size=cfg.n_samples, p=mass)
        masks = np.zeros((cfg.n_samples, d), dtype=bool)
        for row, s in enumerate(drawn):
            masks[row, gen.choice(d, size=int(s), replace=False)] = True
        weights = np.ones(cfg.n_samples)

    values = _coalition_values(model, x, bg, masks, target)
    v_empty = _coalition_values(model, x, bg, np.zeros((1, d), dtype=bool), target)[0]
    v_full = _coalition_values(model, x, bg, np.ones((1, d), dtype=bool), target)[0]
    delta = v_full - v_empty

    # eliminate phi_{d-1} through the efficiency constraint, then solve WLS
    z = masks.astype(np.float64)
    a = z[:, :-1] - z[:, -1:]
    y = values - v_empty - z[:, -1] * delta
    aw = a * weights[:, None]
    lhs = aw.T @ a
    rhs = aw.T @ y
    try:
        phi_head = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ExplanationError(f"kernel SHAP system is singular: {exc}") from exc
    phi = np.append(phi_head, delta - phi_head.sum())
    return make_explanation(phi, "kernelshap")


def permshap_explain(
    model: MlpModel,
    x: np.ndarray,
    background: np.ndarray,
    n_permutations: int | None = 200,
    rng=None,
) -> Explanation:
    """Shapley estimation by antithetic permutation walks.

    Each sampled permutation is walked in forward and reversed order,
    accumulating the marginal change in the predicted-class probability as
    features switch from background to their true values. Pass
    ``n_permutations=None`` to enumerate every permutation (d <= 8), which
    reproduces the exact Shapley value.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    bg = _background_rows(background, d)
    target = predicted_class(model, x)

    if n_permutations is None:
        if d > 8:
            raise RefusalError(f"exhaustive permutations are infeasible for d={d} > 8")
        perms = [np.array(p) for p in itertools.permutations(range(d))]
    else:
        if n_permutations < 1:
            raise ConfigurationError("n_permutations must be >= 1")
        gen = as_generator(rng)
        sampled = [gen.permutation(d) for _ in range(n_permutations)]
        perms = []
        for p in sampled:  # antithetic pair: forward and reversed order
            perms.append(p)
            perms.append(p[::-1])

    # one walk = d+1 cumulative masks from empty to full
    all_masks = np.zeros((len(perms) * (d + 1), d), dtype=bool)
    row = 0
    for p in perms:
        mask = np.zeros(d, dtype=bool)
        row += 1  # leading empty-coalition row stays all False
        for i in p:
            mask[i] = True
            all_masks[row] = mask
            row += 1
    values = _coalition_values(model, x, bg, all_masks, target)

    phi = np.zeros(d)
    row = 0
    for p in perms:
        walk = values[row : row + d + 1]
        phi[p] += np.diff(walk)
        row += d + 1
    phi /= len(perms)
    return make_explanation(phi, "permshap")
