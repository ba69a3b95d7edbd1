"""Graph-attention encoder over semantic graphs.

Graphs in a batch are packed into one disjoint union: node rows are
concatenated and edge endpoints offset accordingly (see ``data.collate``).
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..graph import EdgeType
from .layers import EncoderOutput, uniform_fan_in_

NUM_EDGE_TYPES = len(EdgeType)


@dataclass
class GraphBatch:
    node_kind: torch.Tensor   # (N,) kind ids
    node_tok: torch.Tensor    # (N,) vocabulary ids of leaf text; PAD for internal nodes
    node_leaf: torch.Tensor   # (N,) bool
    edge_src: torch.Tensor    # (E,)
    edge_dst: torch.Tensor    # (E,)
    edge_type: torch.Tensor   # (E,)
    sel_index: torch.Tensor   # (B, l_g) rows into the node table
    sel_mask: torch.Tensor    # (B, l_g) bool

    @property
    def num_nodes(self) -> int:
        return self.node_kind.shape[0]


def edge_softmax(scores: torch.Tensor, dst: torch.Tensor, num_nodes: int) -> torch.Tensor:
    """Softmax of per-edge scores ``(E, H)`` grouped by destination node."""
    H = scores.shape[1]
    idx = dst[:, None].expand(-1, H)
    top = torch.full((num_nodes, H), torch.finfo(scores.dtype).min, dtype=scores.dtype,
                     device=scores.device)
    top = top.scatter_reduce(0, idx, scores.detach(), reduce="amax", include_self=True)
    e = torch.exp(scores - top[dst])
    z = torch.zeros(num_nodes, H, dtype=scores.dtype, device=scores.device).index_add(0, dst, e)
    return e / z[dst]


class GATLayer(nn.Module):
    """One attention layer; per-head scores use the shared node/edge projections.

    s_e = LeakyReLU(a . [W h_dst ; W h_src ; W_e e_type]), alpha = softmax over the
    in-edges of dst, h'_dst = sum_e act(alpha_e * h_src) (activation inside the sum
    unless ``activation_outside``). Heads are concatenated and projected back to
    h_g, or averaged on the last layer.
    """

    def __init__(self, h_g, heads, d_att, last: bool, activation_outside: bool = False):
        super().__init__()
        self.heads, self.d_att, self.last = heads, d_att, last
        self.activation_outside = activation_outside
        self.attn = nn.Parameter(torch.empty(heads, 3 * d_att))
        nn.init.xavier_uniform_(self.attn)
        self.merge = None if last else uniform_fan_in_(nn.Linear(heads * h_g, h_g))

    def forward(self, h, Wh, We, src, dst):
        """h (N, h_g); Wh (N, H, d_att); We (E, H, d_att). Returns (h', alpha (E, H))."""
        d = self.d_att
        a = self.attn
        s = ((Wh[dst] * a[:, :d]).sum(-1) + (Wh[src] * a[:, d:2 * d]).sum(-1)
             + (We * a[:, 2 * d:]).sum(-1))
        alpha = edge_softmax(F.leaky_relu(s, 0.2), dst, h.shape[0])
        msg = alpha[:, :, None] * h[src][:, None, :]            # (E, H, h_g)
        if not self.activation_outside:
            msg = F.elu(msg)
        agg = torch.zeros(h.shape[0], self.heads, h.shape[1], dtype=h.dtype, device=h.device)
        agg = agg.index_add(0, dst, msg)
        if self.activation_outside:
            agg = F.elu(agg)
        if self.last:
            return agg.mean(1), alpha
        return self.merge(agg.reshape(h.shape[0], -1)), alpha


class GEncoder(nn.Module):
    def __init__(self, cfg, token_embedding: nn.Embedding):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = token_embedding
        self.kind_embedding = nn.Embedding(cfg.max_kinds, cfg.d_t)
        self.init = uniform_fan_in_(nn.Linear(cfg.d_model + cfg.d_t, cfg.h_g))
        d_att = cfg.h_g // cfg.head_g
        self.edge_embedding = nn.Embedding(NUM_EDGE_TYPES, cfg.d_edge)
        self.W = nn.Linear(cfg.h_g, cfg.head_g * d_att, bias=False)
        self.W_e = nn.Linear(cfg.d_edge, cfg.head_g * d_att, bias=False)
        self.layers = nn.ModuleList(
            GATLayer(cfg.h_g, cfg.head_g, d_att, last=(i == cfg.L_g - 1),
                     activation_outside=cfg.gat_activation_outside)
            for i in range(cfg.L_g))
        self.out = None if cfg.h_g == cfg.d_e else uniform_fan_in_(nn.Linear(cfg.h_g, cfg.d_e))

    def init_states(self, gb: GraphBatch) -> torch.Tensor:
        """h^(0): Linear([token embedding (zero for internal nodes) ; kind embedding])."""
        text = self.token_embedding(gb.node_tok) * gb.node_leaf[:, None].to(self.init.weight.dtype)
        return self.init(torch.cat([text, self.kind_embedding(gb.node_kind)], dim=-1))

    def run_layers(self, gb: GraphBatch):
        h = self.init_states(gb)
        H, d_att = self.cfg.head_g, self.cfg.h_g // self.cfg.head_g
        We = self.W_e(self.edge_embedding(gb.edge_type)).view(-1, H, d_att)
        states, alphas = [h], []
        for layer in self.layers:
            Wh = self.W(h).view(-1, H, d_att)
            h, alpha = layer(h, Wh, We, gb.edge_src, gb.edge_dst)
            states.append(h)
            alphas.append(alpha)
        return states, alphas

    def forward(self, gb: GraphBatch):
        """Returns (EncoderOutput over the ordered selection, per-layer states, per-layer alphas)."""
        states, alphas = self.run_layers(gb)
        h = states[-1]
        if self.out is not None:
            h = self.out(h)
        sel = h[gb.sel_index] * gb.sel_mask[..., None].to(h.dtype)
        return EncoderOutput(sel, gb.sel_mask), states, alphas
