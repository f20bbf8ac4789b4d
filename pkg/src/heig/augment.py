"""Per-relation feature augmentation and multi-view feature groups.

Every account type has three triplet relations rooted at it.  For each
relation a pre-trained generator produces one synthetic neighbor-feature
row per account (conditioned only on the account's own features, so
zero-neighbor accounts are covered too).  A feature group bundles the
three augmented matrices with the initial features; repeating generation
with independent latent draws yields the multi-view groups consumed by
the classifier.

Augmented features live in standardized space: generators are trained on
z-scored features and their outputs are consumed without inverse scaling.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass, replace
from typing import Mapping, Optional

import numpy as np
import torch

from heig.cvae import DTYPE, CvaeConfig, TripletCvae, generate, new_cvae, pretrain
from heig.errors import EmptyViewList, MissingModel, ShapeMismatch
from heig.features import FEATURE_DIM, Standardizer, feature_matrix
from heig.graph import AccountType, HEIG, TripletRelation

CA_RELATIONS = (
    TripletRelation.CA_CALL_CA,
    TripletRelation.CA_TRANS_CA,
    TripletRelation.CA_TRANS_EOA,
)
EOA_RELATIONS = (
    TripletRelation.EOA_CALL_CA,
    TripletRelation.EOA_TRANS_CA,
    TripletRelation.EOA_TRANS_EOA,
)


def relations_for(kind: AccountType) -> tuple[TripletRelation, ...]:
    """The three relations whose source type is ``kind``, in the canonical
    concatenation order of the feature groups."""
    return CA_RELATIONS if kind is AccountType.CA else EOA_RELATIONS


def derive_seed(master: int, *tokens) -> int:
    """Stable per-task seed stream derived from a master seed."""
    tag = ":".join(str(t) for t in tokens)
    return (master * 1_000_003 + zlib.crc32(tag.encode("utf-8"))) % (2**63)


def collect_pairs(
    g: HEIG,
    relation: TripletRelation,
    features: Optional[Mapping[AccountType, np.ndarray]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack (x_v, x_u) feature pairs, one per edge of the relation.

    ``x_v`` is the source (conditioning) account's features and ``x_u`` the
    target's.  ``features`` maps account type to a feature matrix in
    canonical row order; raw features are computed when omitted.
    """
    if features is None:
        features = {kind: feature_matrix(g, kind) for kind in AccountType}
    src_mat = features[relation.src_kind]
    dst_mat = features[relation.dst_kind]
    edges = g.edges_of(relation)
    x_v = np.zeros((len(edges), FEATURE_DIM), dtype=np.float64)
    x_u = np.zeros((len(edges), FEATURE_DIM), dtype=np.float64)
    for i, e in enumerate(edges):
        x_v[i] = src_mat[g.row_of(e.src)]
        x_u[i] = dst_mat[g.row_of(e.dst)]
    return x_v, x_u


@dataclass
class FeatureGroupSet:
    """Multi-view feature groups for both account types.

    ``*_views[m]`` holds the augmented matrices of view ``m`` in the order
    given by :func:`relations_for`; the initial-feature member is shared by
    all views.  For the augmentation-off configuration the view tuples are
    empty and groups contain only the initial member.
    """

    ca_initial: torch.Tensor
    eoa_initial: torch.Tensor
    ca_views: list[tuple[torch.Tensor, ...]]
    eoa_views: list[tuple[torch.Tensor, ...]]

    def __post_init__(self) -> None:
        if len(self.ca_views) != len(self.eoa_views):
            raise ShapeMismatch("CA and EOA view counts differ")
        for views, initial in ((self.ca_views, self.ca_initial), (self.eoa_views, self.eoa_initial)):
            for view in views:
                for m in view:
                    if m.shape != initial.shape:
                        raise ShapeMismatch(
                            f"augmented member shape {tuple(m.shape)} != "
                            f"initial shape {tuple(initial.shape)}"
                        )

    @property
    def n_views(self) -> int:
        return len(self.ca_views)

    @property
    def members_per_group(self) -> int:
        return len(self.ca_views[0]) + 1 if self.ca_views else 1

    def members(self, kind: AccountType, view: int) -> list[torch.Tensor]:
        """The group matrices of one view: augmented members first, then the
        initial features (the printed concatenation order)."""
        if kind is AccountType.CA:
            return list(self.ca_views[view]) + [self.ca_initial]
        return list(self.eoa_views[view]) + [self.eoa_initial]

    def subset_views(self, n: int) -> "FeatureGroupSet":
        """A group set restricted to the first ``n`` views."""
        if not (1 <= n <= self.n_views):
            raise EmptyViewList(f"cannot take {n} of {self.n_views} views")
        return FeatureGroupSet(
            self.ca_initial, self.eoa_initial, self.ca_views[:n], self.eoa_views[:n]
        )


def standardized_features(
    g: HEIG,
    scalers: Mapping[AccountType, Standardizer],
    raw: Optional[Mapping[AccountType, np.ndarray]] = None,
) -> dict[AccountType, np.ndarray]:
    if raw is None:
        raw = {kind: feature_matrix(g, kind) for kind in AccountType}
    return {kind: scalers[kind].transform(raw[kind]) for kind in AccountType}


def pretrain_models(
    g: HEIG,
    config: CvaeConfig,
    scalers: Mapping[AccountType, Standardizer],
    raw_features: Optional[Mapping[AccountType, np.ndarray]] = None,
) -> dict[TripletRelation, TripletCvae]:
    """Pre-train one generator per triplet relation on standardized pairs.

    Relations with no edges get a freshly initialized (untrained) model so
    augmentation stays total over relations; such models simply decode the
    prior.  Each relation trains with its own derived seed.
    """
    features = standardized_features(g, scalers, raw_features)
    models: dict[TripletRelation, TripletCvae] = {}
    for relation in TripletRelation:
        cfg = replace(config, seed=derive_seed(config.seed, "cvae", relation.token))
        pairs = collect_pairs(g, relation, features)
        if pairs[0].shape[0] == 0:
            models[relation] = new_cvae(relation, cfg)
        else:
            models[relation] = pretrain(relation, pairs, cfg)
    return models


def augment_features(
    g: HEIG,
    models: Mapping[TripletRelation, TripletCvae],
    n_views: int,
    seed: int,
    scalers: Mapping[AccountType, Standardizer],
    raw_features: Optional[Mapping[AccountType, np.ndarray]] = None,
) -> FeatureGroupSet:
    """Generate the multi-view feature groups for every account.

    For each account of type ``t`` and each relation rooted at ``t``, one
    synthetic neighbor-feature row is generated per view, with latent draws
    independent across views (seeded per type/relation/view, so the result
    is reproducible and order-independent).
    """
    if n_views < 1:
        raise EmptyViewList("n_views must be >= 1")
    for relation in TripletRelation:
        if relation not in models:
            raise MissingModel(f"no generator for relation {relation.token}")

    features = standardized_features(g, scalers, raw_features)
    initial = {
        kind: torch.as_tensor(features[kind], dtype=DTYPE) for kind in AccountType
    }
    views: dict[AccountType, list[tuple[torch.Tensor, ...]]] = {
        AccountType.CA: [],
        AccountType.EOA: [],
    }
    for kind in AccountType:
        cond = initial[kind]
        for view in range(n_views):
            members = []
            for relation in relations_for(kind):
                gen = torch.Generator()
                gen.manual_seed(derive_seed(seed, kind.value, relation.token, view))
                members.append(generate(models[relation], cond, generator=gen))
            views[kind].append(tuple(members))
    return FeatureGroupSet(
        ca_initial=initial[AccountType.CA],
        eoa_initial=initial[AccountType.EOA],
        ca_views=views[AccountType.CA],
        eoa_views=views[AccountType.EOA],
    )


def initial_only_group(
    g: HEIG,
    scalers: Mapping[AccountType, Standardizer],
    raw_features: Optional[Mapping[AccountType, np.ndarray]] = None,
) -> FeatureGroupSet:
    """Augmentation-off feature groups: a single view holding only the
    standardized initial features."""
    features = standardized_features(g, scalers, raw_features)
    return FeatureGroupSet(
        ca_initial=torch.as_tensor(features[AccountType.CA], dtype=DTYPE),
        eoa_initial=torch.as_tensor(features[AccountType.EOA], dtype=DTYPE),
        ca_views=[()],
        eoa_views=[()],
    )


def export_group(group: FeatureGroupSet, out_dir: str) -> list[str]:
    """Write one ``.npy`` per (type, relation, view) plus the initial
    matrices; returns the written file names."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for kind in AccountType:
        initial = group.ca_initial if kind is AccountType.CA else group.eoa_initial
        name = f"initial_{kind.value}.npy"
        np.save(os.path.join(out_dir, name), initial.numpy())
        written.append(name)
        for view in range(group.n_views):
            members = group.members(kind, view)[:-1]
            for relation, matrix in zip(relations_for(kind), members):
                name = f"aug_{kind.value}_{relation.token}_v{view}.npy"
                np.save(os.path.join(out_dir, name), matrix.numpy())
                written.append(name)
    return written
