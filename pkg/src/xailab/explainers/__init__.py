"""Post-hoc explainers, each emitting a normalized per-feature importance vector."""

from .base import Explanation, make_explanation, normalize_importance, predicted_class
from .cem import CemConfig, CemResult, cem_pertinent_negative
from .dice import DiceConfig, DiceResult, dice_counterfactuals, dpp_kernel
from .lime import LimeConfig, lime_explain
from .mclime import McLimeConfig, McLimeResult, mc_lime
from .shap import (
    ShapConfig,
    exact_shapley,
    kernel_weight,
    kernelshap_explain,
    permshap_explain,
)

__all__ = [
    "CemConfig",
    "CemResult",
    "DiceConfig",
    "DiceResult",
    "Explanation",
    "LimeConfig",
    "McLimeConfig",
    "McLimeResult",
    "ShapConfig",
    "cem_pertinent_negative",
    "dice_counterfactuals",
    "dpp_kernel",
    "exact_shapley",
    "kernel_weight",
    "kernelshap_explain",
    "lime_explain",
    "make_explanation",
    "mc_lime",
    "normalize_importance",
    "permshap_explain",
    "predicted_class",
]
