import numpy as np
import pytest
import torch

import heig.augment as augment_mod
from heig.augment import (
    FeatureGroupSet,
    augment_features,
    collect_pairs,
    derive_seed,
    export_group,
    initial_only_group,
    pretrain_models,
    relations_for,
)
from heig.cvae import CvaeConfig, generate, new_cvae
from heig.errors import MissingModel, ShapeMismatch
from heig.features import Standardizer, feature_matrix
from heig.graph import (
    Account,
    AccountType,
    InteractionEdge,
    InteractionType,
    TripletRelation,
    build_heig,
)
from heig.trainer import TrainConfig, fit_scalers
from helpers import random_heig


def _identity_scalers():
    return {
        kind: Standardizer(np.zeros(14), np.ones(14)) for kind in AccountType
    }


def _untrained_models(seed=0):
    return {
        rel: new_cvae(rel, CvaeConfig(seed=derive_seed(seed, rel.token)))
        for rel in TripletRelation
    }


class TestRelationsFor:
    def test_ca_relations(self):
        assert relations_for(AccountType.CA) == (
            TripletRelation.CA_CALL_CA,
            TripletRelation.CA_TRANS_CA,
            TripletRelation.CA_TRANS_EOA,
        )

    def test_eoa_relations(self):
        assert relations_for(AccountType.EOA) == (
            TripletRelation.EOA_CALL_CA,
            TripletRelation.EOA_TRANS_CA,
            TripletRelation.EOA_TRANS_EOA,
        )

    def test_partition_of_all_relations(self):
        ca = set(relations_for(AccountType.CA))
        eoa = set(relations_for(AccountType.EOA))
        assert ca.isdisjoint(eoa)
        assert ca | eoa == set(TripletRelation)


class TestCollectPairs:
    def test_empty_relation(self):
        g = build_heig([Account("0xa", AccountType.CA)], [])
        x_v, x_u = collect_pairs(g, TripletRelation.CA_CALL_CA)
        assert x_v.shape == (0, 14) and x_u.shape == (0, 14)

    def test_single_edge_pair(self):
        g = build_heig(
            [Account("0xa", AccountType.CA), Account("0xb", AccountType.CA)],
            [InteractionEdge("0xa", "0xb", InteractionType.CALL, 2, 3.0)],
        )
        x_v, x_u = collect_pairs(g, TripletRelation.CA_CALL_CA)
        np.testing.assert_array_equal(x_v[0], feature_matrix(g, AccountType.CA)[g.row_of("0xa")])
        np.testing.assert_array_equal(x_u[0], feature_matrix(g, AccountType.CA)[g.row_of("0xb")])

    def test_multiset_matches_edge_scan(self):
        g = random_heig(31, n_nodes=25, n_edges=120)
        feats = {k: feature_matrix(g, k) for k in AccountType}
        for rel in TripletRelation:
            x_v, x_u = collect_pairs(g, rel, feats)
            expect = []
            for e in g.edges:
                if (
                    g.accounts[e.src].kind is rel.src_kind
                    and e.kind is rel.edge_kind
                    and g.accounts[e.dst].kind is rel.dst_kind
                ):
                    expect.append(
                        (
                            tuple(feats[rel.src_kind][g.row_of(e.src)]),
                            tuple(feats[rel.dst_kind][g.row_of(e.dst)]),
                        )
                    )
            got = sorted((tuple(v), tuple(u)) for v, u in zip(x_v, x_u))
            assert got == sorted(expect)


class TestAugmentFeatures:
    def test_shapes(self):
        g = random_heig(37, n_nodes=20, n_edges=60)
        group = augment_features(g, _untrained_models(), 2, 9, _identity_scalers())
        assert group.n_views == 2
        assert group.members_per_group == 4
        for view in range(2):
            for m in group.members(AccountType.CA, view):
                assert m.shape == (g.n_ca, 14)
            for m in group.members(AccountType.EOA, view):
                assert m.shape == (g.n_eoa, 14)

    def test_views_differ_but_share_initial(self):
        g = random_heig(41, n_nodes=20, n_edges=60)
        group = augment_features(g, _untrained_models(), 3, 5, _identity_scalers())
        assert group.members(AccountType.CA, 0)[-1] is group.members(AccountType.CA, 2)[-1]
        diff = False
        for a, b in zip(group.ca_views[0], group.ca_views[1]):
            diff |= not torch.equal(a, b)
        assert diff

    def test_zero_latent_pipeline_identity(self, monkeypatch):
        g = random_heig(43, n_nodes=15, n_edges=40)
        models = _untrained_models()
        scalers = _identity_scalers()

        def pinned_generate(model, x_v, generator=None, z=None):
            shape = x_v.shape[:-1] + (model.config.latent_dim,)
            return generate(model, x_v, z=torch.zeros(shape, dtype=torch.float64))

        monkeypatch.setattr(augment_mod, "generate", pinned_generate)
        group = augment_features(g, models, 1, 0, scalers)
        cond = torch.as_tensor(feature_matrix(g, AccountType.CA), dtype=torch.float64)
        for rel, got in zip(relations_for(AccountType.CA), group.ca_views[0]):
            with torch.no_grad():
                expect = models[rel].decode(torch.zeros(len(cond), 8, dtype=torch.float64), cond)
            assert torch.equal(got, expect)

    def test_total_over_accounts_even_without_neighbors(self):
        g = build_heig(
            [Account("0xa", AccountType.CA), Account("0xb", AccountType.EOA)], []
        )
        group = augment_features(g, _untrained_models(), 1, 3, _identity_scalers())
        for kind, n in ((AccountType.CA, 1), (AccountType.EOA, 1)):
            for m in group.members(kind, 0):
                assert m.shape == (n, 14)
                assert torch.all(torch.isfinite(m))

    def test_bit_identical_under_seed(self):
        g = random_heig(47, n_nodes=18, n_edges=50)
        models = _untrained_models()
        scalers = _identity_scalers()
        g1 = augment_features(g, models, 2, 12, scalers)
        g2 = augment_features(g, models, 2, 12, scalers)
        for v1, v2 in zip(g1.ca_views, g2.ca_views):
            for a, b in zip(v1, v2):
                assert torch.equal(a, b)
        g3 = augment_features(g, models, 2, 13, scalers)
        assert not all(
            torch.equal(a, b) for v1, v3 in zip(g1.ca_views, g3.ca_views) for a, b in zip(v1, v3)
        )

    def test_missing_model(self):
        g = random_heig(53, n_nodes=10, n_edges=20)
        models = _untrained_models()
        del models[TripletRelation.EOA_TRANS_EOA]
        with pytest.raises(MissingModel):
            augment_features(g, models, 1, 0, _identity_scalers())


class TestGroupSet:
    def test_member_order_augmented_then_initial(self):
        g = random_heig(59, n_nodes=12, n_edges=30)
        group = augment_features(g, _untrained_models(), 1, 1, _identity_scalers())
        members = group.members(AccountType.CA, 0)
        assert len(members) == 4
        assert members[-1] is group.ca_initial

    def test_subset_views(self):
        g = random_heig(61, n_nodes=12, n_edges=30)
        group = augment_features(g, _untrained_models(), 3, 1, _identity_scalers())
        sub = group.subset_views(2)
        assert sub.n_views == 2
        assert torch.equal(sub.ca_views[0][0], group.ca_views[0][0])

    def test_shape_validation(self):
        with pytest.raises(ShapeMismatch):
            FeatureGroupSet(
                ca_initial=torch.zeros(3, 14),
                eoa_initial=torch.zeros(2, 14),
                ca_views=[(torch.zeros(4, 14),) * 3],
                eoa_views=[(torch.zeros(2, 14),) * 3],
            )

    def test_initial_only_group(self):
        g = random_heig(67, n_nodes=12, n_edges=30)
        group = initial_only_group(g, _identity_scalers())
        assert group.n_views == 1
        assert group.members_per_group == 1
        assert group.members(AccountType.CA, 0) == [group.ca_initial]


def test_pretrain_models_covers_empty_relations():
    # graph with only one populated relation still yields all six generators
    g = build_heig(
        [Account("0xa", AccountType.EOA), Account("0xb", AccountType.CA)],
        [InteractionEdge("0xa", "0xb", InteractionType.TRANS, 1, 1.0)],
    )
    cfg = CvaeConfig(epochs=2, seed=1)
    scalers = fit_scalers(g, TrainConfig(runs=1, lr_grid=(0.01,), hidden_grid=(16,), view_grid=(1,), epochs=1, seed=0))
    models = pretrain_models(g, cfg, scalers)
    assert set(models) == set(TripletRelation)
    assert models[TripletRelation.EOA_TRANS_CA].loss_history  # trained
    assert not models[TripletRelation.CA_CALL_CA].loss_history  # fresh init


def test_export_group_names(tmp_path):
    g = random_heig(71, n_nodes=10, n_edges=25)
    group = augment_features(g, _untrained_models(), 2, 4, _identity_scalers())
    written = export_group(group, str(tmp_path))
    assert "aug_ca_ca_call_ca_v0.npy" in written
    assert "aug_eoa_eoa_trans_eoa_v1.npy" in written
    assert "initial_ca.npy" in written
    loaded = np.load(tmp_path / "aug_ca_ca_call_ca_v1.npy")
    np.testing.assert_array_equal(loaded, group.ca_views[1][0].numpy())


def test_derive_seed_stable_and_distinct():
    assert derive_seed(7, "a", 1) == derive_seed(7, "a", 1)
    assert derive_seed(7, "a", 1) != derive_seed(7, "a", 2)
    assert derive_seed(7, "a", 1) != derive_seed(8, "a", 1)
