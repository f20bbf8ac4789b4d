"""Splits, per-relation neighbor sampling, the optimization loop, grid
search, and micro-F1 evaluation.

Five runs per grid point vary split seed and init seed together; the grid
point with the best mean validation micro-F1 is selected and its test
scores are reported as mean plus population standard deviation.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Mapping, Optional, Sequence

import numpy as np
import torch

from heig.augment import FeatureGroupSet, derive_seed
from heig.containers import digest_of
from heig.errors import ConfigError, EmptyInput, TooFewLabels
from heig.graph import AccountType, HEIG, TripletRelation
from heig.model import (
    GraphBlock,
    ModelConfig,
    MultiViewHGNN,
    full_graph_block,
    new_model,
    prediction_loss,
)

GRID_LEARNING_RATES = (0.01, 0.001)
GRID_HIDDEN_DIMS = (16, 32, 64)
GRID_VIEWS = (1, 2, 3, 4)


@dataclass
class TrainConfig:
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    runs: int = 5
    lr_grid: tuple[float, ...] = GRID_LEARNING_RATES
    hidden_grid: tuple[int, ...] = GRID_HIDDEN_DIMS
    view_grid: tuple[int, ...] = GRID_VIEWS
    heads: int = 4
    fanout: int = 100
    layers: int = 2
    epochs: int = 300
    patience: int = 30
    batch_size: int = 128
    seed: int = 7

    def __post_init__(self) -> None:
        self.ratios = tuple(float(r) for r in self.ratios)
        self.lr_grid = tuple(float(v) for v in self.lr_grid)
        self.hidden_grid = tuple(int(v) for v in self.hidden_grid)
        self.view_grid = tuple(int(v) for v in self.view_grid)
        if len(self.ratios) != 3 or abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.ratios}")
        for value, allowed, name in (
            (self.lr_grid, GRID_LEARNING_RATES, "learning rate"),
            (self.hidden_grid, GRID_HIDDEN_DIMS, "hidden dim"),
            (self.view_grid, GRID_VIEWS, "view count"),
        ):
            if not value:
                raise ConfigError(f"{name} grid is empty")
            bad = [v for v in value if v not in allowed]
            if bad:
                raise ConfigError(f"{name} grid values {bad} not in {allowed}")
        if self.runs < 1 or self.fanout < 1 or self.epochs < 1:
            raise ConfigError("runs, fanout and epochs must be positive")


@dataclass
class Split:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]


def split(
    labels: Mapping[str, bool],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> Split:
    """Stratified train/val/test split of the labeled account ids.

    Per class, val and test take ``floor(ratio * n)`` ids each and train the
    remainder, so small classes never lose their training majority.
    Deterministic under ``seed``.
    """
    by_class: dict[bool, list[str]] = {True: [], False: []}
    for aid in sorted(labels):
        by_class[labels[aid]].append(aid)
    for cls, ids in by_class.items():
        if len(ids) < 5:
            raise TooFewLabels(
                f"need >= 5 labeled nodes per class, class {cls} has {len(ids)}"
            )
    rng = random.Random(seed)
    parts: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    for ids in by_class.values():
        shuffled = ids[:]
        rng.shuffle(shuffled)
        n = len(shuffled)
        n_val = math.floor(ratios[1] * n)
        n_test = math.floor(ratios[2] * n)
        n_train = n - n_val - n_test
        parts["train"].extend(shuffled[:n_train])
        parts["val"].extend(shuffled[n_train : n_train + n_val])
        parts["test"].extend(shuffled[n_train + n_val :])
    return Split(
        tuple(sorted(parts["train"])),
        tuple(sorted(parts["val"])),
        tuple(sorted(parts["test"])),
    )


def micro_f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Micro-averaged F1 over all instances.

    Computed from globally pooled per-class true/false positives; for
    single-label classification this equals accuracy.
    """
    if len(predictions) == 0 or len(predictions) != len(labels):
        raise EmptyInput(
            f"need equal non-empty sequences, got {len(predictions)} and {len(labels)}"
        )
    classes = set(predictions) | set(labels)
    tp = fp = fn = 0
    for c in classes:
        for p, y in zip(predictions, labels):
            if p == c and y == c:
                tp += 1
            elif p == c and y != c:
                fp += 1
            elif p != c and y == c:
                fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def sample_neighbors(
    g: HEIG,
    batch_ids: Sequence[str],
    fanout: int = 100,
    layers: int = 2,
    rng: Optional[np.random.Generator] = None,
) -> list[GraphBlock]:
    """Layered in-neighbor sampling for a batch of CA target nodes.

    Per target node, per triplet relation, per layer, min(fanout, in-degree)
    in-edges are drawn uniformly without replacement.  Returns blocks
    innermost-first; each block's destinations are the prefix of its source
    list, and block ``i``'s destinations equal block ``i+1``'s sources.
    """
    if rng is None:
        rng = np.random.default_rng()
    rel_by_dst = {
        t: [rel for rel in TripletRelation if rel.dst_kind is t] for t in AccountType
    }
    dst_rows: dict[AccountType, list[int]] = {
        AccountType.CA: [g.row_of(b) for b in batch_ids],
        AccountType.EOA: [],
    }
    blocks_outer_first: list[GraphBlock] = []
    for _ in range(layers):
        src_rows = {t: list(dst_rows[t]) for t in AccountType}
        pos_of = {t: {row: i for i, row in enumerate(src_rows[t])} for t in AccountType}
        edges: dict[TripletRelation, tuple[list[int], list[int]]] = {
            rel: ([], []) for rel in TripletRelation
        }
        for t in AccountType:
            ids = g.ids_of(t)
            for dst_pos, row in enumerate(dst_rows[t]):
                aid = ids[row]
                for rel in rel_by_dst[t]:
                    incident = g.in_edges(aid, rel)
                    if len(incident) > fanout:
                        chosen = rng.choice(len(incident), size=fanout, replace=False)
                        picked = [incident[int(i)] for i in chosen]
                    else:
                        picked = incident
                    st = rel.src_kind
                    for eidx in picked:
                        s_row = g.row_of(g.edges[eidx].src)
                        s_pos = pos_of[st].get(s_row)
                        if s_pos is None:
                            s_pos = len(src_rows[st])
                            src_rows[st].append(s_row)
                            pos_of[st][s_row] = s_pos
                        edges[rel][0].append(s_pos)
                        edges[rel][1].append(dst_pos)
        blocks_outer_first.append(
            GraphBlock(
                src_rows={
                    t: torch.tensor(src_rows[t], dtype=torch.long) for t in AccountType
                },
                n_dst={t: len(dst_rows[t]) for t in AccountType},
                edges={
                    rel: (
                        torch.tensor(src, dtype=torch.long),
                        torch.tensor(dst, dtype=torch.long),
                    )
                    for rel, (src, dst) in edges.items()
                },
            )
        )
        dst_rows = src_rows
    return list(reversed(blocks_outer_first))


@dataclass
class EvalReport:
    per_run_f1: list[float]
    mean: float
    std: float
    hyperparameters: dict
    config_hash: str
    dataset: str = "dataset"
    # split and epoch count of the run whose parameters were kept
    selected_run: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "per_run_f1": self.per_run_f1,
            "mean": self.mean,
            "std": self.std,
            "hyperparameters": self.hyperparameters,
            "config_hash": self.config_hash,
            "dataset": self.dataset,
            "selected_run": self.selected_run,
        }

    def format_table(self, method: str = "multi-view-hgnn") -> str:
        """One-row results table, micro-F1 in percent with population std."""
        header = f"{'dataset':<16}{'method':<20}{'micro_f1 (%)':<16}"
        value = f"{self.dataset:<16}{method:<20}{100 * self.mean:.2f} ± {100 * self.std:.2f}"
        return header + "\n" + value


def _label_tensors(
    g: HEIG, labels: Mapping[str, bool]
) -> tuple[torch.Tensor, dict[str, int]]:
    """Long tensor over CA rows (-1 where unlabeled) plus an id->row map."""
    y = torch.full((g.n_ca,), -1, dtype=torch.long)
    row_map = {}
    for aid, lab in labels.items():
        row = g.row_of(aid)
        y[row] = int(lab)
        row_map[aid] = row
    return y, row_map


def _mask(g: HEIG, ids: Sequence[str]) -> torch.Tensor:
    m = torch.zeros(g.n_ca, dtype=torch.bool)
    for aid in ids:
        m[g.row_of(aid)] = True
    return m


@dataclass
class RunResult:
    val_f1: float
    test_f1: float
    state: dict
    epochs_run: int
    split: Split = field(repr=False, default=None)


def train_once(
    g: HEIG,
    group: FeatureGroupSet,
    model_cfg: ModelConfig,
    learning_rate: float,
    cfg: TrainConfig,
    data_split: Split,
    labels: Mapping[str, bool],
    seed: int,
) -> RunResult:
    """One optimization run with early stopping on validation micro-F1."""
    y, _ = _label_tensors(g, labels)
    masks = {
        name: _mask(g, ids)
        for name, ids in (
            ("train", data_split.train),
            ("val", data_split.val),
            ("test", data_split.test),
        )
    }
    model = new_model(model_cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    rng = np.random.default_rng(derive_seed(seed, "sampler"))
    full = full_graph_block(g)
    train_ids = list(data_split.train)

    def evaluate(mask: torch.Tensor) -> float:
        model.eval()
        with torch.no_grad():
            logits = model.forward_blocks(group, [full, full])
        pred = logits.argmax(dim=1)
        return micro_f1(pred[mask].tolist(), y[mask].tolist())

    best_val = -1.0
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    epochs_run = 0
    for epoch in range(cfg.epochs):
        epochs_run = epoch + 1
        order = rng.permutation(len(train_ids))
        model.train()
        for start in range(0, len(train_ids), cfg.batch_size):
            batch = [train_ids[i] for i in order[start : start + cfg.batch_size]]
            blocks = sample_neighbors(g, batch, cfg.fanout, cfg.layers, rng)
            logits = model.forward_blocks(group, blocks)
            target = torch.tensor(
                [int(labels[b]) for b in batch], dtype=torch.long
            )
            loss = prediction_loss(logits, target, torch.ones(len(batch), dtype=torch.bool))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        val_f1 = evaluate(masks["val"])
        if val_f1 > best_val + 1e-12:
            best_val = val_f1
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state_dict(best_state)
    test_f1 = evaluate(masks["test"])
    return RunResult(best_val, test_f1, best_state, epochs_run, data_split)


def fit(
    g: HEIG,
    group: FeatureGroupSet,
    cfg: TrainConfig,
    labels_override: Optional[Mapping[str, bool]] = None,
    dataset_name: str = "dataset",
) -> tuple[MultiViewHGNN, EvalReport]:
    """Grid search over (learning rate, hidden dim, views) with ``cfg.runs``
    runs per point; returns the best-validation model and its test report.

    View counts beyond the group's available views are skipped (an
    initial-features-only group supports a single view).
    """
    labels = dict(labels_override) if labels_override is not None else g.labeled_ca()
    view_grid = [m for m in cfg.view_grid if m <= group.n_views]
    if not view_grid:
        raise ConfigError(
            f"no usable view counts: grid {cfg.view_grid}, group has {group.n_views}"
        )
    members = group.members_per_group

    best: Optional[dict] = None
    for lr, hidden, n_views in product(cfg.lr_grid, cfg.hidden_grid, view_grid):
        sub = group.subset_views(n_views)
        results: list[RunResult] = []
        for run in range(cfg.runs):
            run_seed = cfg.seed + run
            data_split = split(labels, cfg.ratios, seed=run_seed)
            model_cfg = ModelConfig(
                proj_dim=hidden,
                reduced_dim=hidden,
                heads=cfg.heads,
                n_views=n_views,
                members=members,
                seed=derive_seed(run_seed, "init", hidden, n_views),
            )
            results.append(
                train_once(g, sub, model_cfg, lr, cfg, data_split, labels, run_seed)
            )
        mean_val = float(np.mean([r.val_f1 for r in results]))
        if best is None or mean_val > best["mean_val"] + 1e-12:
            best = {
                "mean_val": mean_val,
                "lr": lr,
                "hidden": hidden,
                "n_views": n_views,
                "results": results,
                "model_cfg": None,
            }

    test_scores = [r.test_f1 for r in best["results"]]
    top_run = max(best["results"], key=lambda r: r.val_f1)
    model_cfg = ModelConfig(
        proj_dim=best["hidden"],
        reduced_dim=best["hidden"],
        heads=cfg.heads,
        n_views=best["n_views"],
        members=members,
    )
    model = MultiViewHGNN(model_cfg)
    model.load_state_dict(top_run.state)
    report = EvalReport(
        per_run_f1=[float(s) for s in test_scores],
        mean=float(np.mean(test_scores)),
        std=float(np.std(test_scores)),  # population std, ddof=0
        hyperparameters={
            "learning_rate": best["lr"],
            "hidden_dim": best["hidden"],
            "n_views": best["n_views"],
            "members": members,
            "heads": cfg.heads,
        },
        config_hash=digest_of(asdict(cfg)),
        dataset=dataset_name,
        selected_run={
            "split": {
                "train": list(top_run.split.train),
                "val": list(top_run.split.val),
                "test": list(top_run.split.test),
            },
            "epochs_run": top_run.epochs_run,
        },
    )
    return model, report


def shuffled_labels(labels: Mapping[str, bool], seed: int) -> dict[str, bool]:
    """Label permutation across the labeled ids (null-model control)."""
    ids = sorted(labels)
    values = [labels[a] for a in ids]
    rng = random.Random(seed)
    rng.shuffle(values)
    return dict(zip(ids, values))


def fit_scalers(
    g: HEIG,
    cfg: TrainConfig,
    raw_features: Optional[Mapping[AccountType, "np.ndarray"]] = None,
):
    """Feature scalers for both account types.

    CA statistics come from the training rows of the reference split
    (``cfg.seed``) so held-out labeled nodes never influence scaling; EOA
    nodes carry no labels, so their scaler uses all EOA rows.  Falls back
    to all CA rows when the graph is unlabeled.
    """
    from heig.features import Standardizer, feature_matrix

    if raw_features is None:
        raw_features = {kind: feature_matrix(g, kind) for kind in AccountType}
    labels = g.labeled_ca()
    ca_matrix = raw_features[AccountType.CA]
    if labels:
        ref = split(labels, cfg.ratios, seed=cfg.seed)
        rows = [g.row_of(aid) for aid in ref.train]
        ca_matrix = ca_matrix[rows]
    return {
        AccountType.CA: Standardizer.fit(ca_matrix),
        AccountType.EOA: Standardizer.fit(raw_features[AccountType.EOA]),
    }
