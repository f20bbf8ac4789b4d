import math

import numpy as np
import pytest
import torch

from heig.augment import FeatureGroupSet
from heig.errors import EmptyMask, EmptyViewList, ShapeMismatch
from heig.graph import (
    Account,
    AccountType,
    InteractionEdge,
    InteractionType,
    TripletRelation,
    build_heig,
)
from heig.model import (
    HeteroAttentionLayer,
    ModelConfig,
    MultiViewHGNN,
    full_graph_block,
    mean_pool_views,
    new_model,
    prediction_loss,
)
from helpers import max_relative_grad_error, random_heig

DT = torch.float64


def _rand_group(g, n_views=1, members=4, seed=0):
    """Feature groups with random augmented members (no generators involved)."""
    gen = torch.Generator().manual_seed(seed)
    ca0 = torch.randn(g.n_ca, 14, dtype=DT, generator=gen)
    eoa0 = torch.randn(g.n_eoa, 14, dtype=DT, generator=gen)
    ca_views, eoa_views = [], []
    for _ in range(n_views):
        ca_views.append(tuple(torch.randn(g.n_ca, 14, dtype=DT, generator=gen) for _ in range(members - 1)))
        eoa_views.append(tuple(torch.randn(g.n_eoa, 14, dtype=DT, generator=gen) for _ in range(members - 1)))
    return FeatureGroupSet(ca0, eoa0, ca_views, eoa_views)


def _toy_graph():
    accounts = [
        Account("0xc0", AccountType.CA, True),
        Account("0xc1", AccountType.CA, False),
        Account("0xe0", AccountType.EOA),
    ]
    edges = [
        InteractionEdge("0xc0", "0xc1", InteractionType.CALL, 1, 1.0),
        InteractionEdge("0xe0", "0xc1", InteractionType.TRANS, 2, 3.0),
    ]
    return build_heig(accounts, edges)


class TestProject:
    def test_zero_weights_give_zero(self):
        model = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=4, members=2))
        with torch.no_grad():
            model.proj["ca"].zero_()
        out = model.project({AccountType.CA: [torch.randn(5, 14, dtype=DT)] * 2})
        for m in out[AccountType.CA]:
            assert torch.equal(m, torch.zeros(5, 8, dtype=DT))

    def test_zero_input_gives_zero(self):
        model = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=4))
        out = model.project({AccountType.EOA: [torch.zeros(3, 14, dtype=DT)]})
        assert torch.equal(out[AccountType.EOA][0], torch.zeros(3, 8, dtype=DT))

    def test_shape_and_tanh_bound(self):
        model = new_model(ModelConfig(proj_dim=16, reduced_dim=16, heads=4))
        out = model.project({AccountType.CA: [torch.randn(5, 14, dtype=DT) * 10]})
        assert out[AccountType.CA][0].shape == (5, 16)
        assert torch.all(out[AccountType.CA][0].abs() <= 1.0)

    def test_dim_mismatch(self):
        model = new_model(ModelConfig())
        with pytest.raises(ShapeMismatch):
            model.project({AccountType.CA: [torch.randn(5, 13, dtype=DT)]})


class TestConcatReduce:
    def test_identity_like_reduction_selects_leading_columns(self):
        cfg = ModelConfig(proj_dim=4, reduced_dim=4, heads=4, members=4)
        model = new_model(cfg)
        with torch.no_grad():
            w = torch.zeros(16, 4, dtype=DT)
            w[:4, :4] = torch.eye(4, dtype=DT)
            model.reduce["ca"].copy_(w)
        members = [torch.randn(6, 4, dtype=DT) for _ in range(4)]
        out = model.concat_reduce({AccountType.CA: members})
        assert torch.allclose(out[AccountType.CA], members[0])

    def test_zero_input(self):
        model = new_model(ModelConfig(proj_dim=4, reduced_dim=4, heads=4, members=4))
        out = model.concat_reduce({AccountType.CA: [torch.zeros(3, 4, dtype=DT)] * 4})
        assert torch.equal(out[AccountType.CA], torch.zeros(3, 4, dtype=DT))

    def test_concat_width_is_members_times_proj(self):
        cfg = ModelConfig(proj_dim=5, reduced_dim=4, heads=4, members=4)
        model = new_model(cfg)
        assert model.reduce["ca"].shape == (20, 4)
        with pytest.raises(ShapeMismatch):
            model.concat_reduce({AccountType.CA: [torch.zeros(3, 5, dtype=DT)] * 3})


class TestHeteroLayer:
    def test_isolated_node_passes_through_with_output_bias(self):
        g = build_heig([Account("0xc0", AccountType.CA)], [])
        layer = HeteroAttentionLayer(8, 2)
        feats = {AccountType.CA: torch.randn(1, 8, dtype=DT), AccountType.EOA: torch.zeros(0, 8, dtype=DT)}
        out = layer(feats, full_graph_block(g))
        expect = feats[AccountType.CA] + layer.out["ca"](torch.zeros(1, 8, dtype=DT))
        assert torch.allclose(out[AccountType.CA], expect)

    def test_attention_sums_to_one_per_head(self):
        g = random_heig(3, n_nodes=20, n_edges=80)
        layer = HeteroAttentionLayer(8, 4)
        feats = {
            AccountType.CA: torch.randn(g.n_ca, 8, dtype=DT),
            AccountType.EOA: torch.randn(g.n_eoa, 8, dtype=DT),
        }
        _, attention = layer(feats, full_graph_block(g), return_attention=True)
        for t in AccountType:
            dst, alpha = attention[t]
            if len(dst) == 0:
                continue
            sums = torch.zeros(max(int(dst.max()) + 1, 1), 4, dtype=DT).index_add(0, dst, alpha)
            in_deg = torch.zeros_like(sums[:, 0]).index_add(0, dst, torch.ones(len(dst), dtype=DT))
            covered = in_deg > 0
            assert torch.all((sums[covered] - 1.0).abs() <= 1e-6)

    def test_matches_dense_attention_oracle(self):
        g = _toy_graph()
        layer = HeteroAttentionLayer(4, 1)
        torch.manual_seed(0)
        feats = {
            AccountType.CA: torch.randn(2, 4, dtype=DT),
            AccountType.EOA: torch.randn(1, 4, dtype=DT),
        }
        out = layer(feats, full_graph_block(g))

        def lin(name, t, x):
            m = {"k": layer.key, "q": layer.query, "v": layer.value, "o": layer.out}[name][t]
            return m.weight.detach().numpy() @ x + m.bias.detach().numpy()

        h_ca = feats[AccountType.CA].numpy()
        h_eoa = feats[AccountType.EOA].numpy()
        # target 0xc1 is CA row 1; sources: 0xc0 (CA row 0, call), 0xe0 (EOA row 0, trans)
        q = lin("q", "ca", h_ca[1])
        wa_cc = layer.w_att[TripletRelation.CA_CALL_CA.token].detach().numpy()[0]
        wa_ec = layer.w_att[TripletRelation.EOA_TRANS_CA.token].detach().numpy()[0]
        wm_cc = layer.w_msg[TripletRelation.CA_CALL_CA.token].detach().numpy()[0]
        wm_ec = layer.w_msg[TripletRelation.EOA_TRANS_CA.token].detach().numpy()[0]
        s_cc = q @ (wa_cc @ lin("k", "ca", h_ca[0])) / math.sqrt(4)
        s_ec = q @ (wa_ec @ lin("k", "eoa", h_eoa[0])) / math.sqrt(4)
        e = np.exp([s_cc - max(s_cc, s_ec), s_ec - max(s_cc, s_ec)])
        alpha = e / e.sum()
        agg = alpha[0] * (wm_cc @ lin("v", "ca", h_ca[0])) + alpha[1] * (wm_ec @ lin("v", "eoa", h_eoa[0]))
        expect_c1 = h_ca[1] + lin("o", "ca", agg)
        np.testing.assert_allclose(out[AccountType.CA][1].detach().numpy(), expect_c1, rtol=1e-10)
        # isolated CA: residual + output bias only
        expect_c0 = h_ca[0] + lin("o", "ca", np.zeros(4))
        np.testing.assert_allclose(out[AccountType.CA][0].detach().numpy(), expect_c0, rtol=1e-10)


class TestMeanPool:
    def test_single_view_identity(self):
        h = torch.randn(4, 3, dtype=DT)
        assert torch.equal(mean_pool_views([h]), h)

    def test_opposite_views_cancel(self):
        h = torch.randn(5, 2, dtype=DT)
        assert torch.allclose(mean_pool_views([h, -h]), torch.zeros_like(h))

    def test_three_view_mean(self):
        a, b, c = (torch.randn(3, 3, dtype=DT) for _ in range(3))
        assert torch.allclose(mean_pool_views([a, b, c]), (a + b + c) / 3)

    def test_empty_rejected(self):
        with pytest.raises(EmptyViewList):
            mean_pool_views([])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mean_pool_views([torch.zeros(2, 2), torch.zeros(3, 2)])


class TestForward:
    def test_logit_shape(self):
        g = random_heig(5, n_nodes=15, n_edges=40)
        group = _rand_group(g, n_views=2)
        model = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=2, n_views=2))
        logits = model(group, g)
        assert logits.shape == (g.n_ca, 2)

    def test_duplicated_views_with_shared_params_match_single_view(self):
        g = random_heig(7, n_nodes=12, n_edges=30)
        group1 = _rand_group(g, n_views=1, seed=3)
        group2 = FeatureGroupSet(
            group1.ca_initial, group1.eoa_initial,
            group1.ca_views * 2, group1.eoa_views * 2,
        )
        m1 = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=2, n_views=1, seed=1))
        m2 = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=2, n_views=2, seed=1))
        state = m2.state_dict()
        for k, v in m1.state_dict().items():
            if k.startswith("view_layers.0."):
                state[k] = v
                state[k.replace("view_layers.0.", "view_layers.1.")] = v
            else:
                state[k] = v
        m2.load_state_dict(state)
        with torch.no_grad():
            out1 = m1(group1, g)
            out2 = m2(group2, g)
        assert torch.allclose(out1, out2, atol=1e-12)

    def test_eval_forward_bitwise_deterministic(self):
        g = random_heig(9, n_nodes=15, n_edges=45)
        group = _rand_group(g)
        model = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=2))
        model.eval()
        with torch.no_grad():
            a = model(group, g)
            b = model(group, g)
        assert torch.equal(a, b)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(13)
        kinds = [AccountType.CA] * 4 + [AccountType.EOA] * 4
        ids1 = [f"0x{i:02d}" for i in range(8)]
        rename = {aid: f"0x{99 - i:02d}" for i, aid in enumerate(ids1)}
        feats = {aid: rng.normal(size=14) for aid in ids1}
        aug = {aid: rng.normal(size=(3, 14)) for aid in ids1}
        edges1 = [
            InteractionEdge(ids1[4], ids1[0], InteractionType.TRANS, 1, 2.0),
            InteractionEdge(ids1[4], ids1[1], InteractionType.CALL, 1, 0.0),
            InteractionEdge(ids1[0], ids1[1], InteractionType.CALL, 2, 1.0),
            InteractionEdge(ids1[1], ids1[5], InteractionType.TRANS, 1, 3.0),
            InteractionEdge(ids1[5], ids1[6], InteractionType.TRANS, 3, 0.5),
            InteractionEdge(ids1[2], ids1[3], InteractionType.TRANS, 1, 1.0),
        ]
        g1 = build_heig([Account(a, k) for a, k in zip(ids1, kinds)], edges1)
        g2 = build_heig(
            [Account(rename[a], k) for a, k in zip(ids1, kinds)],
            [InteractionEdge(rename[e.src], rename[e.dst], e.kind, e.count, e.sum) for e in edges1],
        )

        def group_for(g, naming):
            def rows(kind, member):
                ordered = [naming[aid] for aid in g.ids_of(kind)]
                if member == "init":
                    return torch.tensor(np.stack([feats[a] for a in ordered]), dtype=DT)
                return torch.tensor(np.stack([aug[a][member] for a in ordered]), dtype=DT)

            return FeatureGroupSet(
                rows(AccountType.CA, "init"),
                rows(AccountType.EOA, "init"),
                [tuple(rows(AccountType.CA, m) for m in range(3))],
                [tuple(rows(AccountType.EOA, m) for m in range(3))],
            )

        inverse = {v: k for k, v in rename.items()}
        group1 = group_for(g1, {a: a for a in ids1})
        group2 = group_for(g2, inverse)
        model = new_model(ModelConfig(proj_dim=8, reduced_dim=8, heads=2, seed=5))
        with torch.no_grad():
            out1 = model(group1, g1)
            out2 = model(group2, g2)
        for aid, kind in zip(ids1, kinds):
            if kind is AccountType.CA:
                r1 = g1.row_of(aid)
                r2 = g2.row_of(rename[aid])
                assert torch.allclose(out1[r1], out2[r2], atol=1e-6)

    def test_full_pipeline_gradient_check(self):
        g = random_heig(15, n_nodes=9, n_edges=20)
        group = _rand_group(g, n_views=2, seed=2)
        model = new_model(ModelConfig(proj_dim=4, reduced_dim=4, heads=1, n_views=2, seed=3))
        labels = torch.zeros(g.n_ca, dtype=torch.long)
        labels[:: 2] = 1
        mask = torch.ones(g.n_ca, dtype=torch.bool)
        err = max_relative_grad_error(
            lambda: prediction_loss(model(group, g), labels, mask),
            list(model.parameters()),
        )
        assert err < 1e-4


class TestLoss:
    def test_uniform_logits_give_ln2(self):
        logits = torch.zeros(5, 2, dtype=DT)
        labels = torch.tensor([0, 1, 0, 1, 1])
        mask = torch.ones(5, dtype=torch.bool)
        assert prediction_loss(logits, labels, mask).item() == pytest.approx(math.log(2.0))

    def test_large_margin_drives_loss_to_zero(self):
        labels = torch.tensor([0, 1, 1])
        logits = torch.zeros(3, 2, dtype=DT)
        logits[torch.arange(3), labels] = 60.0
        mask = torch.ones(3, dtype=torch.bool)
        assert prediction_loss(logits, labels, mask).item() < 1e-12

    def test_manual_three_node_cross_entropy(self):
        logits = torch.tensor([[1.0, 0.0], [0.0, 2.0], [0.5, 0.5]], dtype=DT)
        labels = torch.tensor([0, 1, 1])
        mask = torch.ones(3, dtype=torch.bool)
        expect = -(
            math.log(math.exp(1) / (math.exp(1) + 1))
            + math.log(math.exp(2) / (math.exp(2) + 1))
            + math.log(0.5)
        ) / 3
        assert prediction_loss(logits, labels, mask).item() == pytest.approx(expect)

    def test_masked_subset_only(self):
        logits = torch.tensor([[10.0, 0.0], [0.0, 10.0]], dtype=DT)
        labels = torch.tensor([0, 0])
        mask = torch.tensor([True, False])
        assert prediction_loss(logits, labels, mask).item() < 1e-4

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            prediction_loss(torch.zeros(2, 2, dtype=DT), torch.zeros(2, dtype=torch.long), torch.zeros(2, dtype=torch.bool))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(reduced_dim=10, heads=4)
    with pytest.raises(EmptyViewList):
        ModelConfig(n_views=0)
    with pytest.raises(ValueError):
        ModelConfig(members=0)
