"""Self-contained classifier checkpoints.

A checkpoint bundles everything needed to score a graph: the classifier
parameters and config, the six relation generators, the feature scalers,
the augmentation seed, and training metadata (seeds, epoch count, metric
history, the split of the saved run).  ``eval --checkpoint F --graph DIR``
therefore needs no other artifacts.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np
import torch

from heig.containers import load_container, save_container
from heig.cvae import DTYPE, CvaeConfig, TripletCvae
from heig.features import Standardizer
from heig.graph import AccountType, TripletRelation
from heig.model import ModelConfig, MultiViewHGNN
from heig.trainer import TrainConfig


@dataclass
class Checkpoint:
    model: MultiViewHGNN
    cvaes: dict[TripletRelation, TripletCvae]
    scalers: dict[AccountType, Standardizer]
    train_config: TrainConfig
    augment_seed: int
    meta: dict


def save_checkpoint(
    path: str,
    model: MultiViewHGNN,
    cvaes: Mapping[TripletRelation, TripletCvae],
    scalers: Mapping[AccountType, Standardizer],
    train_config: TrainConfig,
    augment_seed: int,
    metadata: dict,
) -> None:
    arrays: dict[str, np.ndarray] = {}
    for name, tensor in model.state_dict().items():
        arrays[f"model/{name}"] = tensor.detach().numpy()
    for rel, cvae in cvaes.items():
        for name, tensor in cvae.state_dict().items():
            arrays[f"cvae/{rel.token}/{name}"] = tensor.detach().numpy()
    for kind, scaler in scalers.items():
        arrays[f"scaler/{kind.value}/mean"] = scaler.mean
        arrays[f"scaler/{kind.value}/std"] = scaler.std
    meta = {
        "kind": "pipeline_checkpoint",
        "model_config": asdict(model.config),
        "cvae_configs": {rel.token: asdict(m.config) for rel, m in cvaes.items()},
        "cvae_loss_history": {rel.token: m.loss_history for rel, m in cvaes.items()},
        "train_config": asdict(train_config),
        "augment_seed": augment_seed,
        "metadata": metadata,
    }
    save_container(path, arrays, meta)


def load_checkpoint(path: str) -> Checkpoint:
    arrays, meta = load_container(path)
    if meta.get("kind") != "pipeline_checkpoint":
        raise ValueError(f"{path} is not a pipeline checkpoint")

    model_cfg = ModelConfig(**meta["model_config"])
    model = MultiViewHGNN(model_cfg)
    model.load_state_dict(
        {
            name[len("model/") :]: torch.as_tensor(arr, dtype=DTYPE)
            for name, arr in arrays.items()
            if name.startswith("model/")
        }
    )

    cvaes: dict[TripletRelation, TripletCvae] = {}
    for token, cfg_dict in meta["cvae_configs"].items():
        rel = TripletRelation[token.upper()]
        cfg = CvaeConfig(**{**cfg_dict, "hidden_dims": tuple(cfg_dict["hidden_dims"])})
        cvae = TripletCvae(rel, cfg)
        prefix = f"cvae/{token}/"
        cvae.load_state_dict(
            {
                name[len(prefix) :]: torch.as_tensor(arr, dtype=DTYPE)
                for name, arr in arrays.items()
                if name.startswith(prefix)
            }
        )
        cvae.loss_history = list(meta.get("cvae_loss_history", {}).get(token, []))
        cvaes[rel] = cvae

    scalers = {
        kind: Standardizer(
            mean=arrays[f"scaler/{kind.value}/mean"],
            std=arrays[f"scaler/{kind.value}/std"],
        )
        for kind in AccountType
    }
    train_cfg_data = dict(meta["train_config"])
    train_cfg = TrainConfig(**train_cfg_data)
    return Checkpoint(
        model=model,
        cvaes=cvaes,
        scalers=scalers,
        train_config=train_cfg,
        augment_seed=int(meta["augment_seed"]),
        meta=meta.get("metadata", {}),
    )
