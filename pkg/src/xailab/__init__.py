"""xailab: explainability laboratory for small neural classifiers.

Trains dense classifiers on synthetic data with known ground truth, extracts
explanations with six post-hoc methods plus an intrinsically interpretable
feature-gating model, and measures cross-explainer disagreement, ground-truth
faithfulness, and the effect of adversarial training on explanation
stability.
"""

from . import explainers, gating, harness, metrics, netcore, robust, synthdata
from .errors import XaiLabError
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "RngStream",
    "XaiLabError",
    "explainers",
    "gating",
    "harness",
    "metrics",
    "netcore",
    "robust",
    "synthdata",
]
