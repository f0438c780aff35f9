"""Experiment drivers: disagreement, consistency, and faithfulness runs.

Each driver trains what it needs, explains a fixed representative set, and
returns an ExperimentReport of CSV-ready tables. All randomness flows from
the config's seed list, so identical configs reproduce identical artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ExplanationError, SamplingError, XaiLabError
from ..explainers import (
    CemConfig,
    DiceConfig,
    LimeConfig,
    McLimeConfig,
    ShapConfig,
    cem_pertinent_negative,
    dice_counterfactuals,
    kernelshap_explain,
    lime_explain,
    make_explanation,
    mc_lime,
    permshap_explain,
)
from ..explainers.base import Explanation
from ..gating import (
    active_feature_fraction,
    fg_balanced_accuracy,
    fg_explain,
    fg_train,
    gating_init,
    mask_faithfulness_check,
)
from ..metrics import (
    faithfulness,
    importance_variance,
    important_feature_fraction,
    pairwise_matrix,
    pca_project,
)
from ..netcore import (
    FeatureMatrix,
    MlpModel,
    TrainConfig,
    balanced_accuracy,
    forward_batch,
    mlp_init,
    train,
)
from ..robust import adversarial_accuracy, adversarial_train
from ..rng import RngStream
from ..synthdata import (
    GroundTruthMask,
    SynthSpec,
    normalize_minmax,
    split_stratified_indices,
    synth_gauss,
    synth_logistic,
)
from .config import ExperimentConfig
from .report import ExperimentReport, Table


@dataclass
class DataBundle:
    name: str
    train: FeatureMatrix
    val: FeatureMatrix
    test: FeatureMatrix
    train_mean: np.ndarray
    train_std: np.ndarray
    test_masks: list[GroundTruthMask] | None  # aligned with test rows

    @property
    def n_features(self) -> int:
        return self.train.n_features

    @property
    def n_classes(self) -> int:
        return int(max(self.train.labels.max(), self.test.labels.max())) + 1


def build_bundle(name: str, spec: dict) -> DataBundle:
    """Generate, normalize, and split one configured dataset."""
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "synthgauss":
        raw, cluster_ids, masks = synth_gauss(SynthSpec(**params))
        instance_masks = [masks[c] for c in cluster_ids]
    elif kind == "logistic":
        raw, mask = synth_logistic(**params)
        instance_masks = [mask] * raw.n_instances
    else:
        raise ConfigurationError(f"unknown dataset kind {kind!r}")
    normed, _ = normalize_minmax(raw)
    idx_train, idx_val, idx_test = split_stratified_indices(
        normed.labels, seed=int(spec.get("seed", 0))
    )
    train_fm = normed.subset(idx_train)
    return DataBundle(
        name=name,
        train=train_fm,
        val=normed.subset(idx_val),
        test=normed.subset(idx_test),
        train_mean=train_fm.data.mean(axis=0),
        train_std=train_fm.data.std(axis=0),
        test_masks=[instance_masks[i] for i in idx_test],
    )


def fit_model(bundle: DataBundle, cfg: ExperimentConfig, seed: int) -> MlpModel:
    dims = [bundle.n_features] + list(cfg.model.hidden) + [bundle.n_classes]
    model = mlp_init(dims, seed=seed, head=cfg.model.head)
    tcfg = TrainConfig(
        epochs=cfg.training.epochs,
        batch_size=cfg.training.batch_size,
        learning_rate=cfg.training.learning_rate,
        patience=cfg.training.patience,
        seed=seed,
    )
    return train(model, bundle.train, tcfg).model


def select_representative(
    model: MlpModel, data: FeatureMatrix, n_per_class: int, rng=None
) -> np.ndarray:
    """Per class: order instances by the model's probability for that class
    and pick n evenly spaced ones, always including both endpoints.

    Classes smaller than n are returned whole. The rng argument is accepted
    for interface stability; selection is deterministic.
    """
    if n_per_class < 1:
        raise ConfigurationError("n_per_class must be >= 1")
    chosen: list[int] = []
    for c in range(model.n_classes):
        members = np.flatnonzero(data.labels == c)
        if members.size == 0:
            raise SamplingError(f"class {c} has no instances to sample from")
        probs = forward_batch(model, data.data[members])[:, c]
        ordered = members[np.argsort(probs, kind="stable")]
        if members.size <= n_per_class:
            chosen.extend(ordered.tolist())
        else:
            positions = np.round(
                np.linspace(0, members.size - 1, n_per_class)
            ).astype(int)
            chosen.extend(ordered[positions].tolist())
    return np.array(chosen, dtype=np.int64)


def _get_cfg(cfg: ExperimentConfig, method: str, default_cls):
    found = cfg.explainer_cfgs.get(method)
    return found if found is not None else default_cls()


def explain_instance(
    method: str,
    model: MlpModel,
    x: np.ndarray,
    instance_id: int,
    cfg: ExperimentConfig,
    bundle: DataBundle,
    seed: int,
) -> Explanation | None:
    """Run one explainer; None signals a no-solution result or hard failure."""
    rng = RngStream(seed).derive(method, instance_id)
    try:
        if method == "lime":
            e = lime_explain(model, x, bundle.train_std, _get_cfg(cfg, "lime", LimeConfig), rng)
        elif method == "kernelshap":
            e = kernelshap_explain(
                model, x, bundle.train_mean, _get_cfg(cfg, "kernelshap", ShapConfig), rng
            )
        elif method == "permshap":
            n_perm = cfg.explainer_cfgs.get("permshap", {}).get("n_permutations", 200)
            e = permshap_explain(model, x, bundle.train_mean, n_perm, rng)
        elif method == "cem":
            res = cem_pertinent_negative(
                model, x, _get_cfg(cfg, "cem", CemConfig), bundle.train_std
            )
            e = res.explanation
        elif method == "dice":
            res = dice_counterfactuals(model, x, _get_cfg(cfg, "dice", DiceConfig), rng)
            e = res.explanation
        elif method == "mclime":
            lime_e = lime_explain(
                model, x, bundle.train_std, _get_cfg(cfg, "lime", LimeConfig), rng
            )
            res = mc_lime(
                model, x, lime_e, _get_cfg(cfg, "mclime", McLimeConfig), bundle.train_std
            )
            e = res.explanation
        elif method == "random":
            e = make_explanation(rng.generator.uniform(size=x.shape[0]), "random")
        else:
            raise ConfigurationError(f"unknown explainer {method!r}")
    except XaiLabError:
        return None
    if e is not None:
        e.instance_id = instance_id
        e.seed = seed
    return e


def explain_representatives(
    model: MlpModel,
    bundle: DataBundle,
    rep_indices: np.ndarray,
    methods: list[str],
    cfg: ExperimentConfig,
    seed: int,
) -> dict[str, list[Explanation | None]]:
    """Explain every representative with every method; abort when a method
    fails on more than half the instances."""
    results: dict[str, list[Explanation | None]] = {m: [] for m in methods}
    for method in methods:
        for idx in rep_indices:
            x = bundle.test.data[int(idx)]
            results[method].append(
                explain_instance(method, model, x, int(idx), cfg, bundle, seed)
            )
        failures = sum(e is None for e in results[method])
        if failures > 0.5 * len(rep_indices):
            raise ExplanationError(
                f"{method} failed on {failures}/{len(rep_indices)} representatives"
            )
    return results


def _explanation_tables(
    name_prefix: str,
    by_method: dict[str, list[Explanation | None]],
    feature_names: list[str],
) -> list[Table]:
    tables = []
    for method, explist in by_method.items():
        scores = Table(
            f"{name_prefix}_{method}",
            ["instance_id", "method", "seed"] + list(feature_names),
        )
        raw = Table(
            f"{name_prefix}_{method}_raw",
            ["instance_id", "method", "seed"] + list(feature_names),
        )
        for e in explist:
            if e is None:
                continue
            scores.rows.append([e.instance_id, method, e.seed] + list(e.scores))
            raw.rows.append([e.instance_id, method, e.seed] + list(e.signed_raw))
        tables.extend([scores, raw])
    return tables


def run_disagreement(cfg: ExperimentConfig) -> ExperimentReport:
    """Cross-explainer comparison on one trained model.

    Emits per-method explanation archives, pairwise Spearman / JSD / Jaccard
    matrices, and 2-D PCA coordinates tagged by method.
    """
    spec = cfg.disagreement
    bundle = build_bundle(spec.dataset, cfg.datasets[spec.dataset])
    seed = cfg.seeds[0]
    model = fit_model(bundle, cfg, seed)
    reps = select_representative(
        model, bundle.test, cfg.n_representatives_per_class, RngStream(seed)
    )
    by_method = explain_representatives(model, bundle, reps, spec.methods, cfg, seed)

    # metric matrices use only instances every method explained
    ok = [
        i
        for i in range(len(reps))
        if all(by_method[m][i] is not None for m in spec.methods)
    ]
    aligned = {m: [by_method[m][i] for i in ok] for m in spec.methods}

    report = ExperimentReport(
        kind="disagreement", config_snapshot=cfg.snapshot, seeds=[seed]
    )
    acc = Table("accuracy", ["split", "balanced_accuracy"])
    for split_name, fm in (("train", bundle.train), ("val", bundle.val), ("test", bundle.test)):
        acc.rows.append([split_name, balanced_accuracy(model, fm)])
    report.tables.append(acc)

    report.tables.extend(
        _explanation_tables("explanations", by_method, bundle.train.feature_names)
    )

    for metric in ("spearman", "jsd", "jaccard"):
        pm = pairwise_matrix(aligned, metric, k=spec.jaccard_k)
        t = Table(f"matrix_{metric}", ["method"] + pm.methods)
        for i, m in enumerate(pm.methods):
            t.rows.append([m] + list(pm.matrix[i]))
        report.tables.append(t)

    rows = []
    tags = []
    ids = []
    for m in spec.methods:
        for e in aligned[m]:
            rows.append(e.scores)
            tags.append(m)
            ids.append(e.instance_id)
    pca = pca_project(np.vstack(rows), n_components=2)
    coords = Table("pca_coords", ["method", "instance_id", "pc1", "pc2"])
    for tag, iid, xy in zip(tags, ids, pca.coords):
        coords.rows.append([tag, iid, xy[0], xy[1]])
    report.tables.append(coords)
    var = Table("pca_variance", ["component", "explained_variance_ratio"])
    for i, r in enumerate(pca.explained_variance_ratio):
        var.rows.append([i + 1, r])
    report.tables.append(var)
    return report


def run_consistency(cfg: ExperimentConfig) -> ExperimentReport:
    """Seed-variance study across training regimes (baseline / fgsm / pgd).

    Representatives are fixed once, from the baseline model of the first
    seed, before the regimes fork; every regime/seed model explains the same
    instances.
    """
    spec = cfg.consistency
    if len(cfg.seeds) < 2:
        raise ConfigurationError("consistency runs need at least 2 seeds")
    bundle = build_bundle(spec.dataset, cfg.datasets[spec.dataset])
    anchor = fit_model(bundle, cfg, cfg.seeds[0])
    reps = select_representative(
        anchor, bundle.test, cfg.n_representatives_per_class, RngStream(cfg.seeds[0])
    )

    report = ExperimentReport(
        kind="consistency", config_snapshot=cfg.snapshot, seeds=list(cfg.seeds)
    )
    acc = Table(
        "accuracy", ["regime", "seed", "clean_bac", "fgsm_bac", "pgd_bac"]
    )
    frac = Table("feature_fraction", ["regime", "seed", "method", "important_feature_fraction"])
    var_profile = Table("variance_profile", ["regime", "method", "instance_id", "feature", "std"])
    summary = Table(
        "variance_summary",
        [
            "regime",
            "method",
            "median_std",
            "q1_std",
            "q3_std",
            "median_feature_fraction",
            "n_common_instances",
        ],
    )
    expl_tables: list[Table] = []

    per_regime: dict[str, dict[str, list[list[Explanation | None]]]] = {}
    for regime in spec.regimes:
        per_seed_expl: dict[str, list[list[Explanation | None]]] = {
            m: [] for m in spec.methods
        }
        for seed in cfg.seeds:
            if regime == "baseline":
                model = fit_model(bundle, cfg, seed)
            elif regime in cfg.attacks:
                dims = [bundle.n_features] + list(cfg.model.hidden) + [bundle.n_classes]
                init = mlp_init(dims, seed=seed, head=cfg.model.head)
                tcfg = TrainConfig(
                    epochs=cfg.training.epochs,
                    batch_size=cfg.training.batch_size,
                    learning_rate=cfg.training.learning_rate,
                    patience=cfg.training.patience,
                    seed=seed,
                )
                model = adversarial_train(init, bundle.train, cfg.attacks[regime], tcfg).model
            else:
                raise ConfigurationError(f"unknown regime {regime!r}")
            acc.rows.append(
                [
                    regime,
                    seed,
                    balanced_accuracy(model, bundle.test),
                    adversarial_accuracy(model, bundle.test, cfg.attacks["fgsm"]),
                    adversarial_accuracy(model, bundle.test, cfg.attacks["pgd"]),
                ]
            )
            by_method = explain_representatives(
                model, bundle, reps, spec.methods, cfg, seed
            )
            for m in spec.methods:
                per_seed_expl[m].append(by_method[m])
                good = [e for e in by_method[m] if e is not None]
                frac.rows.append(
                    [regime, seed, m, important_feature_fraction(good)]
                )
        per_regime[regime] = per_seed_expl

        for m in spec.methods:
            archive = Table(
                f"expl_{regime}_{m}",
                ["seed", "instance_id"] + list(bundle.train.feature_names),
            )
            for seed, explist in zip(cfg.seeds, per_seed_expl[m]):
                for e in explist:
                    if e is not None:
                        archive.rows.append([seed, e.instance_id] + list(e.scores))
            expl_tables.append(archive)

            common = [
                i
                for i in range(len(reps))
                if all(per_seed_expl[m][s][i] is not None for s in range(len(cfg.seeds)))
            ]
            pooled_stds: list[float] = []
            for i in common:
                runs = [per_seed_expl[m][s][i] for s in range(len(cfg.seeds))]
                prof = importance_variance(runs)
                iid = runs[0].instance_id
                for f_name, s_val in zip(bundle.train.feature_names, prof.per_feature_std):
                    var_profile.rows.append([regime, m, iid, f_name, s_val])
                pooled_stds.extend(prof.per_feature_std.tolist())
            fracs = [
                row[3] for row in frac.rows if row[0] == regime and row[2] == m
            ]
            pooled = np.array(pooled_stds) if pooled_stds else np.array([np.nan])
            summary.rows.append(
                [
                    regime,
                    m,
                    float(np.median(pooled)),
                    float(np.quantile(pooled, 0.25)),
                    float(np.quantile(pooled, 0.75)),
                    float(np.median(fracs)),
                    len(common),
                ]
            )

    report.tables.extend([acc, frac, var_profile, summary])
    report.tables.extend(expl_tables)
    return report


def run_faithfulness(cfg: ExperimentConfig) -> ExperimentReport:
    """Ground-truth faithfulness of every enabled method, plus gating.

    For each configured dataset and seed, trains a plain model and a gating
    model, explains the shared representatives, scores FA/RA/PRA/GTA against
    the generator's masks, and verifies the gating mask-faithfulness bound.
    """
    spec = cfg.faithfulness
    report = ExperimentReport(
        kind="faithfulness", config_snapshot=cfg.snapshot, seeds=list(cfg.seeds)
    )
    table = Table(
        "faithfulness",
        [
            "dataset",
            "method",
            "fa_mean",
            "fa_std",
            "ra_mean",
            "ra_std",
            "pra_mean",
            "pra_std",
            "gta_mean",
            "gta_std",
            "gtf",
        ],
    )
    gtf_table = Table("gtf_check", ["dataset", "seed", "n_test", "pass_fraction"])
    gate_stats = Table(
        "gating_stats",
        ["dataset", "seed", "model_bac", "gating_bac", "active_fraction"],
    )

    methods = list(spec.methods)
    if spec.include_random_baseline and "random" not in methods:
        methods.append("random")

    for ds_name in spec.datasets:
        if ds_name not in cfg.datasets:
            raise ConfigurationError(f"faithfulness dataset {ds_name!r} is not configured")
        bundle = build_bundle(ds_name, cfg.datasets[ds_name])
        if bundle.test_masks is None:
            raise ConfigurationError(f"dataset {ds_name!r} carries no ground truth")

        per_method_seed_means: dict[str, dict[str, list[float]]] = {
            m: {k: [] for k in ("FA", "RA", "PRA", "GTA")} for m in methods + ["gating"]
        }
        gtf_all_pass = True
        reps: np.ndarray | None = None
        for seed in cfg.seeds:
            model = fit_model(bundle, cfg, seed)
            if reps is None:
                reps = select_representative(
                    model, bundle.test, cfg.n_representatives_per_class, RngStream(seed)
                )
            gmodel = gating_init(
                [bundle.n_features] + list(cfg.model.hidden) + [bundle.n_classes],
                seed=seed,
                hidden_discriminator=cfg.gating.hidden_discriminator,
                tau=cfg.gating.tau,
                threshold=cfg.gating.threshold,
                l1_weight=cfg.gating.l1_weight,
            )
            gcfg = TrainConfig(
                epochs=cfg.gating.epochs or cfg.training.epochs,
                batch_size=cfg.training.batch_size,
                learning_rate=cfg.gating.learning_rate or cfg.training.learning_rate,
                seed=seed,
            )
            gmodel, _ = fg_train(gmodel, bundle.train, gcfg)
            gtf = mask_faithfulness_check(
                gmodel, bundle.test.data, RngStream(seed).derive("gtf")
            )
            gtf_table.rows.append([ds_name, seed, bundle.test.n_instances, gtf])
            gtf_all_pass &= gtf == 1.0
            gate_stats.rows.append(
                [
                    ds_name,
                    seed,
                    balanced_accuracy(model, bundle.test),
                    fg_balanced_accuracy(gmodel, bundle.test),
                    active_feature_fraction(gmodel, bundle.test.data),
                ]
            )

            by_method = explain_representatives(model, bundle, reps, methods, cfg, seed)
            gate_expls = []
            for i in reps:
                ge = fg_explain(gmodel, bundle.test.data[int(i)])
                ge.instance_id = int(i)
                ge.seed = seed
                gate_expls.append(ge)
            by_method["gating"] = gate_expls
            for m, explist in by_method.items():
                vals: dict[str, list[float]] = {k: [] for k in ("FA", "RA", "PRA", "GTA")}
                for pos, e in enumerate(explist):
                    if e is None:
                        continue
                    gt = bundle.test_masks[int(reps[pos])]
                    scored = faithfulness(e, gt, spec.k)
                    for k, v in scored.items():
                        if not np.isnan(v):
                            vals[k].append(v)
                for k in vals:
                    if vals[k]:
                        per_method_seed_means[m][k].append(float(np.mean(vals[k])))

        for m in methods + ["gating"]:
            row: list = [ds_name, m]
            for k in ("FA", "RA", "PRA", "GTA"):
                seeds_vals = per_method_seed_means[m][k]
                if seeds_vals:
                    row.append(float(np.mean(seeds_vals)))
                    row.append(float(np.std(seeds_vals)))
                else:
                    row.extend([None, None])
            row.append(100.0 if (m == "gating" and gtf_all_pass) else None)
            table.rows.append(row)

    report.tables.extend([table, gtf_table, gate_stats])
    return report
