"""Multi-view heterogeneous GNN classifier over augmented feature groups.

Pipeline per view: type-specific linear projection with Tanh, concatenation
of the group members, linear reduction, then a heterogeneous multi-head
attention layer.  View outputs are fused by mean pooling, passed through a
final heterogeneous layer, and contract-account rows feed a linear
classification head.

The attention layer uses per-node-type key/query/value projections and
per-relation attention/message weight matrices:

    score(s -> t, head h) = q_t[h] . (Wa_r[h] k_s[h]) / sqrt(d_head)
    alpha = softmax of scores over all in-edges of t (jointly across relations)
    agg_t[h] = sum_e alpha_e * (Wm_r[h] v_s[h])
    out_t = x_t + OutProj_type(agg_t)

so isolated nodes pass through as ``x_t + OutProj(0)``.  Everything runs in
float64; message passing works on "blocks" that describe which rows of the
per-type matrices participate, which makes full-graph and sampled-subgraph
execution share one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn

from heig.augment import FeatureGroupSet, relations_for
from heig.errors import EmptyMask, EmptyViewList, ShapeMismatch
from heig.graph import FEATURE_DIM, AccountType, HEIG, TripletRelation

DTYPE = torch.float64


@dataclass
class ModelConfig:
    proj_dim: int = 16
    reduced_dim: int = 16
    heads: int = 4
    n_views: int = 1
    members: int = 4  # group members per type: 4 augmented, 1 for backbone-only
    feature_dim: int = FEATURE_DIM
    n_classes: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.proj_dim < 1 or self.reduced_dim < 1:
            raise ValueError("projection and reduction dims must be positive")
        if self.reduced_dim % self.heads != 0:
            raise ValueError(
                f"heads ({self.heads}) must divide the layer dim ({self.reduced_dim})"
            )
        if self.n_views < 1:
            raise EmptyViewList("n_views must be >= 1")
        if self.members < 1:
            raise ValueError("members must be >= 1")


@dataclass
class GraphBlock:
    """One message-passing step over a subset of the graph.

    ``src_rows[t]`` are global row indices (canonical per-type order) of the
    nodes whose features enter the layer; the first ``n_dst[t]`` of them are
    the nodes whose outputs are produced.  ``edges[r]`` holds local
    positions into the source/destination node lists.
    """

    src_rows: dict[AccountType, torch.Tensor]
    n_dst: dict[AccountType, int]
    edges: dict[TripletRelation, tuple[torch.Tensor, torch.Tensor]] = field(
        default_factory=dict
    )


def full_graph_block(g: HEIG) -> GraphBlock:
    """A block covering every node and every edge (dst = src = all nodes)."""
    src_rows = {
        AccountType.CA: torch.arange(g.n_ca, dtype=torch.long),
        AccountType.EOA: torch.arange(g.n_eoa, dtype=torch.long),
    }
    n_dst = {AccountType.CA: g.n_ca, AccountType.EOA: g.n_eoa}
    edges: dict[TripletRelation, tuple[list[int], list[int]]] = {
        rel: ([], []) for rel in TripletRelation
    }
    for idx, e in enumerate(g.edges):
        rel = g.relation_of(idx)
        edges[rel][0].append(g.row_of(e.src))
        edges[rel][1].append(g.row_of(e.dst))
    tensor_edges = {
        rel: (
            torch.tensor(src, dtype=torch.long),
            torch.tensor(dst, dtype=torch.long),
        )
        for rel, (src, dst) in edges.items()
    }
    return GraphBlock(src_rows, n_dst, tensor_edges)


class HeteroAttentionLayer(nn.Module):
    """Relation-aware multi-head attention with per-type projections."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ValueError("heads must divide dim")
        self.dim = dim
        self.heads = heads
        self.d_head = dim // heads
        self.key = nn.ModuleDict(
            {t.value: nn.Linear(dim, dim, dtype=DTYPE) for t in AccountType}
        )
        self.query = nn.ModuleDict(
            {t.value: nn.Linear(dim, dim, dtype=DTYPE) for t in AccountType}
        )
        self.value = nn.ModuleDict(
            {t.value: nn.Linear(dim, dim, dtype=DTYPE) for t in AccountType}
        )
        self.out = nn.ModuleDict(
            {t.value: nn.Linear(dim, dim, dtype=DTYPE) for t in AccountType}
        )
        self.w_att = nn.ParameterDict()
        self.w_msg = nn.ParameterDict()
        for rel in TripletRelation:
            att = torch.empty(heads, self.d_head, self.d_head, dtype=DTYPE)
            msg = torch.empty(heads, self.d_head, self.d_head, dtype=DTYPE)
            for h in range(heads):
                nn.init.xavier_uniform_(att[h])
                nn.init.xavier_uniform_(msg[h])
            self.w_att[rel.token] = nn.Parameter(att)
            self.w_msg[rel.token] = nn.Parameter(msg)

    def forward(
        self,
        feats: dict[AccountType, torch.Tensor],
        block: GraphBlock,
        return_attention: bool = False,
    ):
        """Run one attention step.

        ``feats[t]`` must align row-by-row with ``block.src_rows[t]``.
        Returns per-type output matrices of shape ``(n_dst[t], dim)``; with
        ``return_attention`` also returns, per type, the edge destination
        positions and per-head coefficients.
        """
        for t, x in feats.items():
            if x.shape[0] != len(block.src_rows[t]) or x.shape[1] != self.dim:
                raise ShapeMismatch(
                    f"{t.value} features {tuple(x.shape)} do not match block "
                    f"({len(block.src_rows[t])} nodes, dim {self.dim})"
                )
        keys = {t: self.key[t.value](feats[t]) for t in AccountType}
        values = {t: self.value[t.value](feats[t]) for t in AccountType}
        queries = {
            t: self.query[t.value](feats[t][: block.n_dst[t]]) for t in AccountType
        }

        # per destination type: concatenated edge scores/messages across relations
        scores: dict[AccountType, list[torch.Tensor]] = {t: [] for t in AccountType}
        messages: dict[AccountType, list[torch.Tensor]] = {t: [] for t in AccountType}
        dst_pos: dict[AccountType, list[torch.Tensor]] = {t: [] for t in AccountType}
        for rel, (src_idx, dst_idx) in block.edges.items():
            if len(src_idx) == 0:
                continue
            st, dt = rel.src_kind, rel.dst_kind
            n_e = len(src_idx)
            k_e = keys[st][src_idx].view(n_e, self.heads, self.d_head)
            v_e = values[st][src_idx].view(n_e, self.heads, self.d_head)
            q_e = queries[dt][dst_idx].view(n_e, self.heads, self.d_head)
            k_rel = torch.einsum("hfd,ehd->ehf", self.w_att[rel.token], k_e)
            scores[dt].append((q_e * k_rel).sum(-1) / math.sqrt(self.d_head))
            messages[dt].append(
                torch.einsum("hfd,ehd->ehf", self.w_msg[rel.token], v_e)
            )
            dst_pos[dt].append(dst_idx)

        outputs: dict[AccountType, torch.Tensor] = {}
        attention: dict[AccountType, tuple[torch.Tensor, torch.Tensor]] = {}
        for t in AccountType:
            n_dst = block.n_dst[t]
            agg = torch.zeros(n_dst, self.heads, self.d_head, dtype=DTYPE)
            if scores[t]:
                s = torch.cat(scores[t], dim=0)  # (E, heads)
                m = torch.cat(messages[t], dim=0)  # (E, heads, d_head)
                d = torch.cat(dst_pos[t], dim=0)  # (E,)
                d_expanded = d.unsqueeze(1).expand(-1, self.heads)
                with torch.no_grad():
                    s_max = torch.full((n_dst, self.heads), -torch.inf, dtype=DTYPE)
                    s_max.scatter_reduce_(
                        0, d_expanded, s.detach(), reduce="amax", include_self=True
                    )
                    s_max = torch.where(torch.isinf(s_max), 0.0, s_max)
                exp_s = torch.exp(s - s_max[d])
                denom = torch.zeros(n_dst, self.heads, dtype=DTYPE).index_add(
                    0, d, exp_s
                )
                alpha = exp_s / denom[d]
                agg = agg.index_add(0, d, alpha.unsqueeze(-1) * m)
                attention[t] = (d, alpha)
            else:
                attention[t] = (
                    torch.zeros(0, dtype=torch.long),
                    torch.zeros(0, self.heads, dtype=DTYPE),
                )
            outputs[t] = feats[t][:n_dst] + self.out[t.value](
                agg.reshape(n_dst, self.dim)
            )
        if return_attention:
            return outputs, attention
        return outputs


def mean_pool_views(views: list[torch.Tensor]) -> torch.Tensor:
    """Elementwise arithmetic mean across views."""
    if not views:
        raise EmptyViewList("cannot pool zero views")
    first = views[0]
    for v in views[1:]:
        if v.shape != first.shape:
            raise ShapeMismatch("view matrices must be shape-identical")
    return torch.stack(views, dim=0).mean(dim=0)


class MultiViewHGNN(nn.Module):
    """The full classifier: project, reduce, per-view attention, pooling,
    final attention, contract-account head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.proj = nn.ParameterDict()
        self.reduce = nn.ParameterDict()
        for t in AccountType:
            proj = torch.empty(config.feature_dim, config.proj_dim, dtype=DTYPE)
            reduce = torch.empty(
                config.members * config.proj_dim, config.reduced_dim, dtype=DTYPE
            )
            nn.init.kaiming_uniform_(proj, a=math.sqrt(5))
            nn.init.kaiming_uniform_(reduce, a=math.sqrt(5))
            self.proj[t.value] = nn.Parameter(proj)
            self.reduce[t.value] = nn.Parameter(reduce)
        self.view_layers = nn.ModuleList(
            HeteroAttentionLayer(config.reduced_dim, config.heads)
            for _ in range(config.n_views)
        )
        self.final_layer = HeteroAttentionLayer(config.reduced_dim, config.heads)
        self.head = nn.Linear(config.reduced_dim, config.n_classes, dtype=DTYPE)

    def project(
        self, members: dict[AccountType, list[torch.Tensor]]
    ) -> dict[AccountType, list[torch.Tensor]]:
        """Tanh(X @ proj_type) applied to every member of each type's group."""
        out: dict[AccountType, list[torch.Tensor]] = {}
        for t, group in members.items():
            w = self.proj[t.value]
            for x in group:
                if x.shape[-1] != w.shape[0]:
                    raise ShapeMismatch(
                        f"{t.value} member has dim {x.shape[-1]}, expected {w.shape[0]}"
                    )
            out[t] = [torch.tanh(x @ w) for x in group]
        return out

    def concat_reduce(
        self, projected: dict[AccountType, list[torch.Tensor]]
    ) -> dict[AccountType, torch.Tensor]:
        """Concatenate group members in canonical order and reduce linearly
        (no activation)."""
        out: dict[AccountType, torch.Tensor] = {}
        for t, group in projected.items():
            if len(group) != self.config.members:
                raise ShapeMismatch(
                    f"{t.value} group has {len(group)} members, "
                    f"expected {self.config.members}"
                )
            out[t] = torch.cat(group, dim=-1) @ self.reduce[t.value]
        return out

    def _view_features(
        self, group: FeatureGroupSet, view: int, rows: dict[AccountType, torch.Tensor]
    ) -> dict[AccountType, torch.Tensor]:
        members = {
            t: [m[rows[t]] for m in group.members(t, view)] for t in AccountType
        }
        return self.concat_reduce(self.project(members))

    def forward_blocks(
        self, group: FeatureGroupSet, blocks: list[GraphBlock]
    ) -> torch.Tensor:
        """Logits for the outer block's CA destination nodes.

        ``blocks`` is innermost-first: block 0 feeds the per-view layers,
        block 1 the final layer; block 0's destinations must equal block 1's
        sources, in order.
        """
        if len(blocks) != 2:
            raise ShapeMismatch(f"expected 2 blocks, got {len(blocks)}")
        if group.n_views != self.config.n_views:
            raise ShapeMismatch(
                f"group has {group.n_views} views, model expects {self.config.n_views}"
            )
        inner, outer = blocks
        view_outputs: list[dict[AccountType, torch.Tensor]] = []
        for m, layer in enumerate(self.view_layers):
            h = self._view_features(group, m, inner.src_rows)
            view_outputs.append(layer(h, inner))
        pooled = {
            t: mean_pool_views([o[t] for o in view_outputs]) for t in AccountType
        }
        final = self.final_layer(pooled, outer)
        return self.head(final[AccountType.CA])

    def forward(self, group: FeatureGroupSet, g: HEIG) -> torch.Tensor:
        """Full-graph logits for every CA node (n_ca x n_classes)."""
        block = full_graph_block(g)
        return self.forward_blocks(group, [block, block])


def new_model(config: ModelConfig) -> MultiViewHGNN:
    """A freshly initialized classifier seeded by the config."""
    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        return MultiViewHGNN(config)


def prediction_loss(
    logits: torch.Tensor, labels: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """Cross-entropy averaged over the masked (labeled training) nodes."""
    if mask.sum() == 0:
        raise EmptyMask("no labeled nodes selected by the mask")
    return F.cross_entropy(logits[mask], labels[mask])
