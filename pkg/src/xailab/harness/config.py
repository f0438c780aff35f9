"""Experiment configuration: strict JSON schema with fail-fast validation.

Configs are plain JSON documents with an explicit schema version. Unknown
keys are errors everywhere, so a config that loads is a config this build
fully understands; the canonical serialization is hashed into every report.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigurationError
from ..explainers import CemConfig, DiceConfig, LimeConfig, McLimeConfig, ShapConfig
from ..netcore import TrainConfig
from ..robust import AttackConfig

CONFIG_SCHEMA_VERSION = 1

KNOWN_METHODS = ("lime", "kernelshap", "permshap", "cem", "dice", "mclime")

_TOP_KEYS = {
    "schema_version",
    "output_dir",
    "seeds",
    "n_representatives_per_class",
    "datasets",
    "model",
    "training",
    "explainers",
    "attacks",
    "gating",
    "disagreement",
    "consistency",
    "faithfulness",
}

_DATASET_KEYS = {
    "synthgauss": {
        "kind",
        "n_clusters",
        "points_per_cluster",
        "n_features",
        "relevant_per_cluster",
        "separation",
        "noise",
        "seed",
    },
    "logistic": {"kind", "d", "support", "n", "noise", "seed", "weight_scale"},
}

_MODEL_KEYS = {"hidden", "head"}
_TRAIN_KEYS = {"epochs", "batch_size", "learning_rate", "patience"}
_GATING_KEYS = {"hidden_discriminator", "tau", "threshold", "l1_weight", "epochs", "learning_rate"}
_DISAGREE_KEYS = {"dataset", "methods", "jaccard_k"}
_CONSISTENCY_KEYS = {"dataset", "methods", "regimes"}
_FAITHFULNESS_KEYS = {"datasets", "k", "methods", "include_random_baseline"}

_EXPLAINER_CFG = {
    "lime": LimeConfig,
    "kernelshap": ShapConfig,
    "cem": CemConfig,
    "dice": DiceConfig,
    "mclime": McLimeConfig,
}
_PERMSHAP_KEYS = {"n_permutations"}


def _check_keys(section: dict, allowed: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class ModelSpec:
    hidden: list[int] = field(default_factory=lambda: [16])
    head: str = "auto"


@dataclass
class GatingSpec:
    hidden_discriminator: list[int] = field(default_factory=lambda: [16])
    tau: float = 1.0
    threshold: float = 0.5
    l1_weight: float = 0.1
    epochs: int | None = None          # defaults to training.epochs
    learning_rate: float | None = None # defaults to training.learning_rate


@dataclass
class DisagreementSpec:
    dataset: str = "gauss"
    methods: list[str] = field(default_factory=lambda: ["lime", "kernelshap", "permshap"])
    jaccard_k: int = 10


@dataclass
class ConsistencySpec:
    dataset: str = "gauss"
    methods: list[str] = field(default_factory=lambda: ["cem"])
    regimes: list[str] = field(default_factory=lambda: ["baseline", "fgsm", "pgd"])


@dataclass
class FaithfulnessSpec:
    datasets: list[str] = field(default_factory=lambda: ["gauss", "logit"])
    k: int = 5
    methods: list[str] = field(default_factory=lambda: ["lime", "kernelshap"])
    include_random_baseline: bool = True


@dataclass
class ExperimentConfig:
    output_dir: str
    seeds: list[int]
    n_representatives_per_class: int
    datasets: dict[str, dict]
    model: ModelSpec
    training: TrainConfig
    explainer_cfgs: dict[str, object]
    attacks: dict[str, AttackConfig]
    gating: GatingSpec
    disagreement: DisagreementSpec
    consistency: ConsistencySpec
    faithfulness: FaithfulnessSpec
    snapshot: dict  # the raw document, for hashing and re-emission

    @property
    def config_hash(self) -> str:
        return hash_config(self.snapshot)


def hash_config(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _build_dataclass(cls, section: dict, where: str):
    fields = {f for f in cls.__dataclass_fields__}
    _check_keys(section, fields, where)
    return cls(**section)


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "config")
    version = doc.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigurationError(
            f"config schema_version {version!r} is not supported "
            f"(this build reads {CONFIG_SCHEMA_VERSION})"
        )

    seeds = doc.get("seeds", [0])
    if not seeds:
        raise ConfigurationError("need at least one seed")
    n_reps = int(doc.get("n_representatives_per_class", 25))
    if n_reps < 1:
        raise ConfigurationError("n_representatives_per_class must be >= 1")

    datasets = doc.get("datasets", {})
    for name, spec in datasets.items():
        kind = spec.get("kind")
        if kind not in _DATASET_KEYS:
            raise ConfigurationError(
                f"dataset {name!r} has unknown kind {kind!r} "
                f"(expected one of {sorted(_DATASET_KEYS)})"
            )
        _check_keys(spec, _DATASET_KEYS[kind], f"datasets.{name}")

    model_sec = doc.get("model", {})
    _check_keys(model_sec, _MODEL_KEYS, "model")
    model = ModelSpec(**model_sec)

    train_sec = doc.get("training", {})
    _check_keys(train_sec, _TRAIN_KEYS, "training")
    training = TrainConfig(**train_sec)

    expl_sec = doc.get("explainers", {})
    _check_keys(expl_sec, set(KNOWN_METHODS), "explainers")
    explainer_cfgs: dict[str, object] = {}
    for method, sub in expl_sec.items():
        if method == "permshap":
            _check_keys(sub, _PERMSHAP_KEYS, "explainers.permshap")
            explainer_cfgs[method] = dict(sub)
        else:
            explainer_cfgs[method] = _build_dataclass(
                _EXPLAINER_CFG[method], sub, f"explainers.{method}"
            )

    attacks_sec = doc.get("attacks", {})
    _check_keys(attacks_sec, {"fgsm", "pgd"}, "attacks")
    attacks = {}
    for name, sub in attacks_sec.items():
        _check_keys(sub, {"epsilon", "alpha", "iterations"}, f"attacks.{name}")
        attacks[name] = AttackConfig(method=name, **sub)
    attacks.setdefault("fgsm", AttackConfig(method="fgsm"))
    attacks.setdefault("pgd", AttackConfig(method="pgd"))

    gating_sec = doc.get("gating", {})
    _check_keys(gating_sec, _GATING_KEYS, "gating")
    gating = GatingSpec(**gating_sec)

    def _sub(name, keys, cls):
        sec = doc.get(name, {})
        _check_keys(sec, keys, name)
        return cls(**sec)

    return ExperimentConfig(
        output_dir=str(doc.get("output_dir", "xailab_out")),
        seeds=[int(s) for s in seeds],
        n_representatives_per_class=n_reps,
        datasets=datasets,
        model=model,
        training=training,
        explainer_cfgs=explainer_cfgs,
        attacks=attacks,
        gating=gating,
        disagreement=_sub("disagreement", _DISAGREE_KEYS, DisagreementSpec),
        consistency=_sub("consistency", _CONSISTENCY_KEYS, ConsistencySpec),
        faithfulness=_sub("faithfulness", _FAITHFULNESS_KEYS, FaithfulnessSpec),
        snapshot=doc,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
