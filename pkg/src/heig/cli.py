"""Command-line pipeline: synth, build-graph, features, pretrain-cvae,
augment, train, eval, stats.

Each stage writes its outputs plus a ``manifest.json`` (input/output
hashes, seed, config digest) under its output directory, so identical
configs reproduce identical artifacts hash-for-hash.  Stages are wired
either through explicit flags or through a YAML config consumed by
:func:`run_stage`.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import asdict, field
from typing import Optional

import numpy as np
import yaml

from heig import __version__
from heig.augment import (
    augment_features,
    derive_seed,
    export_group,
    initial_only_group,
    pretrain_models,
)
from heig.checkpoint import load_checkpoint, save_checkpoint
from heig.containers import (
    digest_of,
    hash_files,
    load_container,
    save_container,
    sha256_file,
    write_manifest,
)
from heig.cvae import CvaeConfig, load_cvae, save_cvae
from heig.errors import ConfigError, HeigError, MissingUpstream
from heig.features import (
    Standardizer,
    feature_matrix,
    read_features_csv,
    write_features_csv,
)
from heig.graph import (
    AccountType,
    TripletRelation,
    format_stats_table,
    load_accounts_csv,
    load_graph,
    read_labels_csv,
    relation_stats,
    save_graph,
    write_labels_csv,
)
from heig.ingest import DatasetSpec, assemble_dataset, parse_records, write_records_csv
from heig.synthgen import SynthSpec, generate
from heig.trainer import TrainConfig, fit, fit_scalers, micro_f1, split

STAGES = (
    "synth",
    "build-graph",
    "features",
    "pretrain-cvae",
    "augment",
    "train",
    "eval",
    "stats",
)


# ---------------------------------------------------------------------------
# Configuration


@dataclasses.dataclass
class PipelineConfig:
    workdir: str = "work"
    records: Optional[str] = None
    labels: Optional[str] = None
    accounts: Optional[str] = None
    dataset_name: str = "dataset"
    k: float = 1.0
    negatives: int = 191
    dataset_seed: int = 7
    synth: Optional[SynthSpec] = None
    cvae: CvaeConfig = field(default_factory=CvaeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    augment_views: Optional[int] = None
    augment_seed: Optional[int] = None
    augmented: bool = True


def _build_dataclass(cls, data: dict, section: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in section {section!r}: {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {section!r}: {exc}") from None


def _coerce_synth(data: dict) -> SynthSpec:
    data = dict(data)
    for key in ("amounts", "background_density"):
        if key in data:
            data[key] = {
                TripletRelation[k.upper()]: v for k, v in dict(data[key]).items()
            }
    for key in (
        "investor_range",
        "payout_fraction",
        "payout_scale",
        "invest_amount",
        "customer_range",
        "outflow_ratio",
    ):
        if key in data:
            data[key] = tuple(data[key])
    return _build_dataclass(SynthSpec, data, "synth")


def load_config(path: str) -> PipelineConfig:
    """Load the YAML pipeline config with per-stage sections."""
    if not os.path.exists(path):
        raise MissingUpstream(f"config file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")

    known = {"paths", "dataset", "synth", "cvae", "train", "augment"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")

    cfg = PipelineConfig()
    paths = data.get("paths", {}) or {}
    for key in ("workdir", "records", "labels", "accounts"):
        if key in paths:
            setattr(cfg, key, paths[key])
    bad = sorted(set(paths) - {"workdir", "records", "labels", "accounts"})
    if bad:
        raise ConfigError(f"unknown keys in section 'paths': {bad}")

    dataset = data.get("dataset", {}) or {}
    mapping = {"name": "dataset_name", "k": "k", "negatives": "negatives", "seed": "dataset_seed"}
    bad = sorted(set(dataset) - set(mapping))
    if bad:
        raise ConfigError(f"unknown keys in section 'dataset': {bad}")
    for key, attr in mapping.items():
        if key in dataset:
            setattr(cfg, attr, dataset[key])

    if "synth" in data and data["synth"] is not None:
        cfg.synth = _coerce_synth(data["synth"])
    if "cvae" in data and data["cvae"] is not None:
        cvae_data = dict(data["cvae"])
        if "hidden_dims" in cvae_data:
            cvae_data["hidden_dims"] = tuple(cvae_data["hidden_dims"])
        cfg.cvae = _build_dataclass(CvaeConfig, cvae_data, "cvae")
    if "train" in data and data["train"] is not None:
        cfg.train = _build_dataclass(TrainConfig, dict(data["train"]), "train")

    aug = data.get("augment", {}) or {}
    bad = sorted(set(aug) - {"views", "seed", "enabled"})
    if bad:
        raise ConfigError(f"unknown keys in section 'augment': {bad}")
    cfg.augment_views = aug.get("views")
    cfg.augment_seed = aug.get("seed")
    cfg.augmented = bool(aug.get("enabled", True))
    return cfg


def _require(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise MissingUpstream(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# Stages


def stage_synth(spec: SynthSpec, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    result = generate(spec)
    records_path = os.path.join(out_dir, "records.csv")
    labels_path = os.path.join(out_dir, "labels.csv")
    write_records_csv(records_path, result.records)
    write_labels_csv(labels_path, result.labels)
    accounts_path, edges_path = save_graph(result.graph, out_dir)
    ledger_path = os.path.join(out_dir, "ledger.json")
    with open(ledger_path, "w", encoding="utf-8") as fh:
        json.dump(
            {rel.token: n for rel, n in result.ledger.items()},
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    outputs = hash_files(
        {
            "records.csv": records_path,
            "labels.csv": labels_path,
            "accounts.csv": accounts_path,
            "edges.csv": edges_path,
            "ledger.json": ledger_path,
        }
    )
    spec_dict = asdict(spec)
    spec_dict["amounts"] = {r.token: v for r, v in spec.amounts.items()}
    spec_dict["background_density"] = {
        r.token: v for r, v in spec.background_density.items()
    }
    manifest_path = write_manifest(
        out_dir, "synth", {}, outputs, spec.seed, digest_of(spec_dict)
    )
    return json.load(open(manifest_path, encoding="utf-8"))


def stage_build_graph(
    records_path: str,
    labels_path: str,
    out_dir: str,
    k: float,
    negatives: int,
    seed: int,
    accounts_path: Optional[str] = None,
) -> dict:
    _require(records_path, "records CSV")
    _require(labels_path, "labels CSV")
    os.makedirs(out_dir, exist_ok=True)
    records = parse_records(records_path)
    labels = read_labels_csv(labels_path)
    kinds = None
    inputs = {"records.csv": records_path, "labels.csv": labels_path}
    if accounts_path is not None:
        _require(accounts_path, "accounts CSV")
        kinds = {a.id: a.kind for a in load_accounts_csv(accounts_path)}
        inputs["accounts.csv"] = accounts_path
    spec = DatasetSpec(
        seed_labels=labels, negative_sample_size=negatives, k=k, seed=seed
    )
    g = assemble_dataset(records, spec, kinds=kinds)
    accounts_out, edges_out = save_graph(g, out_dir)
    outputs = hash_files({"accounts.csv": accounts_out, "edges.csv": edges_out})
    manifest_path = write_manifest(
        out_dir,
        "build-graph",
        hash_files(inputs),
        outputs,
        seed,
        digest_of({"k": k, "negatives": negatives, "seed": seed}),
    )
    return json.load(open(manifest_path, encoding="utf-8"))


def _graph_inputs(graph_dir: str) -> dict[str, str]:
    return {
        "accounts.csv": _require(os.path.join(graph_dir, "accounts.csv"), "graph accounts"),
        "edges.csv": _require(os.path.join(graph_dir, "edges.csv"), "graph edges"),
    }


def stage_features(graph_dir: str, out_dir: str) -> dict:
    inputs = _graph_inputs(graph_dir)
    g = load_graph(graph_dir)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for kind in AccountType:
        matrix = feature_matrix(g, kind)
        path = os.path.join(out_dir, f"features_{kind.value}.csv")
        write_features_csv(path, g.ids_of(kind), matrix)
        paths[f"features_{kind.value}.csv"] = path
    manifest_path = write_manifest(
        out_dir, "features", hash_files(inputs), hash_files(paths), None, digest_of({})
    )
    return json.load(open(manifest_path, encoding="utf-8"))


def _load_feature_dir(g, features_dir: str) -> dict[AccountType, np.ndarray]:
    raw = {}
    for kind in AccountType:
        path = _require(
            os.path.join(features_dir, f"features_{kind.value}.csv"),
            f"{kind.value} feature CSV",
        )
        ids, matrix = read_features_csv(path)
        if ids != g.ids_of(kind):
            raise ConfigError(
                f"feature CSV {path} does not match the graph's {kind.value} accounts"
            )
        raw[kind] = matrix
    return raw


def save_scalers(path: str, scalers: dict[AccountType, Standardizer]) -> None:
    arrays = {}
    for kind, scaler in scalers.items():
        arrays[f"{kind.value}/mean"] = scaler.mean
        arrays[f"{kind.value}/std"] = scaler.std
    save_container(path, arrays, {"kind": "feature_scalers"})


def load_scalers(path: str) -> dict[AccountType, Standardizer]:
    arrays, meta = load_container(path)
    if meta.get("kind") != "feature_scalers":
        raise ConfigError(f"{path} is not a scaler container")
    return {
        kind: Standardizer(arrays[f"{kind.value}/mean"], arrays[f"{kind.value}/std"])
        for kind in AccountType
    }


def stage_pretrain(
    graph_dir: str,
    features_dir: str,
    out_dir: str,
    cvae_cfg: CvaeConfig,
    train_cfg: TrainConfig,
) -> dict:
    inputs = _graph_inputs(graph_dir)
    g = load_graph(graph_dir)
    raw = _load_feature_dir(g, features_dir)
    for kind in AccountType:
        inputs[f"features_{kind.value}.csv"] = os.path.join(
            features_dir, f"features_{kind.value}.csv"
        )
    os.makedirs(out_dir, exist_ok=True)

    scalers = fit_scalers(g, train_cfg, raw)
    models = pretrain_models(g, cvae_cfg, scalers, raw)
    paths = {}
    scaler_path = os.path.join(out_dir, "scaler.npz")
    save_scalers(scaler_path, scalers)
    paths["scaler.npz"] = scaler_path
    for rel, model in models.items():
        path = os.path.join(out_dir, f"cvae_{rel.token}.npz")
        save_cvae(path, model)
        paths[f"cvae_{rel.token}.npz"] = path
    manifest_path = write_manifest(
        out_dir,
        "pretrain-cvae",
        hash_files(inputs),
        hash_files(paths),
        cvae_cfg.seed,
        digest_of({"cvae": asdict(cvae_cfg), "ratios": train_cfg.ratios, "split_seed": train_cfg.seed}),
    )
    return json.load(open(manifest_path, encoding="utf-8"))


def _load_cvae_dir(cvae_dir: str):
    scalers = load_scalers(_require(os.path.join(cvae_dir, "scaler.npz"), "scaler container"))
    models = {}
    for rel in TripletRelation:
        path = _require(
            os.path.join(cvae_dir, f"cvae_{rel.token}.npz"),
            f"generator checkpoint for {rel.token}",
        )
        models[rel] = load_cvae(path)
    return models, scalers


def stage_augment(
    graph_dir: str,
    features_dir: str,
    cvae_dir: str,
    out_dir: str,
    n_views: int,
    seed: int,
) -> dict:
    inputs = _graph_inputs(graph_dir)
    g = load_graph(graph_dir)
    raw = _load_feature_dir(g, features_dir)
    models, scalers = _load_cvae_dir(cvae_dir)
    inputs["scaler.npz"] = os.path.join(cvae_dir, "scaler.npz")
    for rel in TripletRelation:
        inputs[f"cvae_{rel.token}.npz"] = os.path.join(cvae_dir, f"cvae_{rel.token}.npz")
    os.makedirs(out_dir, exist_ok=True)

    group = augment_features(g, models, n_views, seed, scalers, raw)
    written = export_group(group, out_dir)
    outputs = hash_files({name: os.path.join(out_dir, name) for name in written})
    manifest_path = write_manifest(
        out_dir,
        "augment",
        hash_files(inputs),
        outputs,
        seed,
        digest_of({"views": n_views, "seed": seed}),
    )
    return json.load(open(manifest_path, encoding="utf-8"))


def stage_train(
    graph_dir: str,
    cvae_dir: str,
    out_dir: str,
    train_cfg: TrainConfig,
    dataset_name: str = "dataset",
    augmented: bool = True,
    augment_seed: Optional[int] = None,
    augment_views: Optional[int] = None,
) -> dict:
    inputs = _graph_inputs(graph_dir)
    g = load_graph(graph_dir)
    models, scalers = _load_cvae_dir(cvae_dir)
    inputs["scaler.npz"] = os.path.join(cvae_dir, "scaler.npz")
    for rel in TripletRelation:
        inputs[f"cvae_{rel.token}.npz"] = os.path.join(cvae_dir, f"cvae_{rel.token}.npz")
    os.makedirs(out_dir, exist_ok=True)

    seed = derive_seed(train_cfg.seed, "augment") if augment_seed is None else augment_seed
    if augmented:
        views = augment_views if augment_views is not None else max(train_cfg.view_grid)
        group = augment_features(g, models, views, seed, scalers)
    else:
        group = initial_only_group(g, scalers)

    model, report = fit(g, group, train_cfg, dataset_name=dataset_name)

    checkpoint_path = os.path.join(out_dir, "checkpoint.npz")
    save_checkpoint(
        checkpoint_path,
        model,
        models,
        scalers,
        train_cfg,
        seed,
        metadata={"report": report.as_dict(), "dataset": dataset_name},
    )
    report_json = os.path.join(out_dir, "report.json")
    with open(report_json, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    report_txt = os.path.join(out_dir, "report.txt")
    method = "multi-view-hgnn" if augmented else "backbone-only"
    with open(report_txt, "w", encoding="utf-8") as fh:
        fh.write(report.format_table(method) + "\n")
    outputs = hash_files(
        {
            "checkpoint.npz": checkpoint_path,
            "report.json": report_json,
            "report.txt": report_txt,
        }
    )
    manifest_path = write_manifest(
        out_dir,
        "train",
        hash_files(inputs),
        outputs,
        train_cfg.seed,
        digest_of(
            {
                "train": asdict(train_cfg),
                "augmented": augmented,
                "augment_seed": seed,
                "augment_views": augment_views,
            }
        ),
    )
    return json.load(open(manifest_path, encoding="utf-8"))


def stage_eval(
    checkpoint_path: str, graph_dir: str, out_dir: Optional[str] = None
) -> dict:
    _require(checkpoint_path, "checkpoint")
    inputs = _graph_inputs(graph_dir)
    inputs["checkpoint.npz"] = checkpoint_path
    g = load_graph(graph_dir)
    ckpt = load_checkpoint(checkpoint_path)

    if ckpt.model.config.members == 1:
        group = initial_only_group(g, ckpt.scalers)
    else:
        group = augment_features(
            g, ckpt.cvaes, ckpt.model.config.n_views, ckpt.augment_seed, ckpt.scalers
        )
    import torch

    ckpt.model.eval()
    with torch.no_grad():
        logits = ckpt.model(group, g)
    pred = logits.argmax(dim=1)

    labels = g.labeled_ca()
    if not labels:
        raise ConfigError("graph has no labeled contract accounts to evaluate")
    rows = [g.row_of(a) for a in sorted(labels)]
    truth = [int(labels[a]) for a in sorted(labels)]
    result = {
        "checkpoint": os.path.basename(checkpoint_path),
        "n_labeled": len(rows),
        "micro_f1_all_labeled": micro_f1([int(pred[r]) for r in rows], truth),
    }
    stored_split = (
        ckpt.meta.get("report", {}).get("selected_run", {}).get("split", {})
    )
    test_ids = [a for a in stored_split.get("test", []) if a in labels]
    if test_ids:
        t_rows = [g.row_of(a) for a in test_ids]
        result["micro_f1_stored_test_split"] = micro_f1(
            [int(pred[r]) for r in t_rows], [int(labels[a]) for a in test_ids]
        )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        report_path = os.path.join(out_dir, "eval_report.json")
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(result, fh, sort_keys=True, indent=2)
            fh.write("\n")
        write_manifest(
            out_dir,
            "eval",
            hash_files(inputs),
            hash_files({"eval_report.json": report_path}),
            None,
            digest_of({}),
        )
    return result


def stage_stats(graph_dir: str, name: str = "dataset") -> str:
    _graph_inputs(graph_dir)
    g = load_graph(graph_dir)
    return format_stats_table(relation_stats(g), name)


# ---------------------------------------------------------------------------
# Config-driven stage runner


def run_stage(stage: str, cfg: PipelineConfig, seed_override: Optional[int] = None) -> dict:
    """Execute one pipeline stage using the conventional workdir layout."""
    w = cfg.workdir
    dirs = {
        "synth": os.path.join(w, "synth"),
        "graph": os.path.join(w, "graph"),
        "features": os.path.join(w, "features"),
        "cvae": os.path.join(w, "cvae"),
        "augment": os.path.join(w, "augment"),
        "train": os.path.join(w, "train"),
        "eval": os.path.join(w, "eval"),
    }
    if stage == "synth":
        if cfg.synth is None:
            raise ConfigError("config has no synth section")
        spec = cfg.synth
        if seed_override is not None:
            spec = dataclasses.replace(spec, seed=seed_override)
        return stage_synth(spec, dirs["synth"])
    if stage == "build-graph":
        records = cfg.records or os.path.join(dirs["synth"], "records.csv")
        labels = cfg.labels or os.path.join(dirs["synth"], "labels.csv")
        accounts = cfg.accounts
        if accounts is None:
            candidate = os.path.join(dirs["synth"], "accounts.csv")
            accounts = candidate if os.path.exists(candidate) else None
        seed = cfg.dataset_seed if seed_override is None else seed_override
        return stage_build_graph(
            records, labels, dirs["graph"], cfg.k, cfg.negatives, seed, accounts
        )
    if stage == "features":
        return stage_features(dirs["graph"], dirs["features"])
    if stage == "pretrain-cvae":
        cvae_cfg = cfg.cvae
        if seed_override is not None:
            cvae_cfg = dataclasses.replace(cvae_cfg, seed=seed_override)
        return stage_pretrain(
            dirs["graph"], dirs["features"], dirs["cvae"], cvae_cfg, cfg.train
        )
    if stage == "augment":
        views = cfg.augment_views or max(cfg.train.view_grid)
        seed = cfg.augment_seed
        if seed is None:
            seed = derive_seed(cfg.train.seed, "augment")
        if seed_override is not None:
            seed = seed_override
        return stage_augment(
            dirs["graph"], dirs["features"], dirs["cvae"], dirs["augment"], views, seed
        )
    if stage == "train":
        train_cfg = cfg.train
        if seed_override is not None:
            train_cfg = dataclasses.replace(train_cfg, seed=seed_override)
        return stage_train(
            dirs["graph"],
            dirs["cvae"],
            dirs["train"],
            train_cfg,
            dataset_name=cfg.dataset_name,
            augmented=cfg.augmented,
            augment_seed=cfg.augment_seed,
            augment_views=cfg.augment_views,
        )
    if stage == "eval":
        checkpoint = os.path.join(dirs["train"], "checkpoint.npz")
        return stage_eval(checkpoint, dirs["graph"], dirs["eval"])
    if stage == "stats":
        print(stage_stats(dirs["graph"], cfg.dataset_name))
        return {}
    raise ConfigError(f"unknown stage {stage!r}; expected one of {STAGES}")


# ---------------------------------------------------------------------------
# Argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heig",
        description="Ethereum interaction-graph Ponzi detection pipeline",
    )
    parser.add_argument("--seed", type=int, default=None, help="global seed override")
    parser.add_argument("--version", action="version", version=f"heig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--spec", required=True, help="YAML file with generator settings")
    p.add_argument("--out", required=True)

    p = sub.add_parser("build-graph", help="assemble a dataset version from raw records")
    p.add_argument("--records", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--k", type=float, default=0.01)
    p.add_argument("--neg", type=int, default=191)
    p.add_argument("--seed", type=int, default=None, dest="stage_seed")
    p.add_argument("--accounts", default=None, help="optional account-type CSV")
    p.add_argument("--out", required=True)

    p = sub.add_parser("features", help="export the 14-dim account features")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pretrain-cvae", help="pre-train the six relation generators")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("augment", help="export multi-view augmented features")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--cvae", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="grid search + train the classifier")
    p.add_argument("--graph", required=True)
    p.add_argument("--cvae", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a graph")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("--graph", required=True)
    p.add_argument("--name", default="dataset")
    return parser


def _load_synth_spec(path: str) -> SynthSpec:
    if not os.path.exists(path):
        raise MissingUpstream(f"spec file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if "synth" in data:
        data = data["synth"]
    return _coerce_synth(data)


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            spec = _load_synth_spec(args.spec)
            if args.seed is not None:
                spec = dataclasses.replace(spec, seed=args.seed)
            stage_synth(spec, args.out)
        elif args.command == "build-graph":
            seed = args.stage_seed if args.stage_seed is not None else (args.seed or 0)
            stage_build_graph(
                args.records, args.labels, args.out, args.k, args.neg, seed, args.accounts
            )
        elif args.command == "features":
            stage_features(args.graph, args.out)
        elif args.command == "pretrain-cvae":
            cfg = load_config(args.config) if args.config else PipelineConfig()
            cvae_cfg = cfg.cvae
            if args.seed is not None:
                cvae_cfg = dataclasses.replace(cvae_cfg, seed=args.seed)
            stage_pretrain(args.graph, args.features, args.out, cvae_cfg, cfg.train)
        elif args.command == "augment":
            cfg = load_config(args.config) if args.config else PipelineConfig()
            views = cfg.augment_views or max(cfg.train.view_grid)
            seed = cfg.augment_seed
            if seed is None:
                seed = derive_seed(cfg.train.seed, "augment")
            if args.seed is not None:
                seed = args.seed
            stage_augment(args.graph, args.features, args.cvae, args.out, views, seed)
        elif args.command == "train":
            cfg = load_config(args.config) if args.config else PipelineConfig()
            train_cfg = cfg.train
            if args.seed is not None:
                train_cfg = dataclasses.replace(train_cfg, seed=args.seed)
            manifest = stage_train(
                args.graph,
                args.cvae,
                args.out,
                train_cfg,
                dataset_name=cfg.dataset_name,
                augmented=cfg.augmented,
                augment_seed=cfg.augment_seed,
                augment_views=cfg.augment_views,
            )
            report_path = os.path.join(args.out, "report.txt")
            with open(report_path, "r", encoding="utf-8") as fh:
                print(fh.read().rstrip())
            del manifest
        elif args.command == "eval":
            result = stage_eval(args.checkpoint, args.graph, args.out)
            print(json.dumps(result, sort_keys=True, indent=2))
        elif args.command == "stats":
            print(stage_stats(args.graph, args.name))
    except HeigError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
