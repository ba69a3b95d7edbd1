"""Dual-copy output head: three-way gate, vocabulary softmax, and copy distributions."""
from __future__ import annotations

from collections import defaultdict

import torch
from torch import nn

from ..errors import DegenerateMask
from .layers import masked_softmax

COPY_BRANCHES = {"dual": (True, True, True), "code": (True, True, False),
                 "graph": (True, False, True), "none": (True, False, False)}


def _t(x):
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float64)


def gate_probs(d_t, W_gen, branches=(True, True, True)):
    """(p_v, p_c, p_g) = softmax(W_gen . d_t); disabled branches get exactly zero."""
    logits = _t(W_gen) @ _t(d_t)
    mask = torch.tensor(branches, dtype=torch.bool).expand_as(logits)
    return masked_softmax(logits, mask)


def copy_dists(attn_c_row, attn_g_row, leaf_mask, pad_masks, renormalize=True):
    """Turn last-layer attention rows into copy distributions.

    ``pad_masks`` is (code validity, graph validity); ``leaf_mask`` marks graph
    positions holding leaf nodes. Padding is zeroed in both rows, internal nodes
    in the graph row, and each row is renormalized over what remains.
    """
    code_valid, graph_valid = (_t(m).bool() for m in pad_masks)
    a_c = _t(attn_c_row) * code_valid
    a_g = _t(attn_g_row) * (graph_valid & _t(leaf_mask).bool())
    if not code_valid.any():
        raise DegenerateMask("every code position is masked")
    if not (graph_valid & _t(leaf_mask).bool()).any():
        raise DegenerateMask("no unmasked leaf position in the graph row")
    a_c = a_c / a_c.sum()
    if renormalize:
        a_g = a_g / a_g.sum()
    return a_c, a_g


def token_dist(gate, p_voc, a_c, a_g, code_tokens, leaf_texts, vocab_tokens=None) -> dict:
    """Merged distribution keyed by surface token (vocabulary plus copied source tokens).

    ``p_voc`` is either a mapping token -> probability or an array aligned with
    ``vocab_tokens``.
    """
    p_v, p_c, p_g = (float(x) for x in gate)
    merged = defaultdict(float)
    if isinstance(p_voc, dict):
        items = p_voc.items()
    else:
        items = zip(vocab_tokens, (float(x) for x in p_voc))
    for tok, p in items:
        merged[tok] += p_v * p
    for tok, a in zip(code_tokens, a_c):
        merged[tok] += p_c * float(a)
    for tok, a in zip(leaf_texts, a_g):
        merged[tok] += p_g * float(a)
    return dict(merged)


class CopyGenerator(nn.Module):
    def __init__(self, d_e, vocab_size, copy_mode="dual", renormalize_leaf_copy=True):
        super().__init__()
        self.W_gen = nn.Linear(d_e, 3, bias=False)
        self.W_voc = nn.Linear(d_e, vocab_size, bias=False)
        self.copy_mode = copy_mode
        self.renormalize = renormalize_leaf_copy

    def forward(self, d, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext,
                copy_mode=None):
        """Batched merged distribution over the extended vocabulary ``V + n_ext``.

        d (B, T, d_e); attn_c (B, T, l_c); attn_g (B, T, l_g); code_ext (B, l_c) and
        sel_ext (B, l_g) hold extended ids of the code tokens / selected graph nodes.
        """
        branches = COPY_BRANCHES[copy_mode or self.copy_mode]
        gmask = torch.tensor(branches, dtype=torch.bool, device=d.device)
        gate = masked_softmax(self.W_gen(d), gmask)
        p_voc = torch.softmax(self.W_voc(d), dim=-1)
        a_c = attn_c * code_mask[:, None, :]
        a_c = a_c / a_c.sum(-1, keepdim=True).clamp_min(torch.finfo(d.dtype).tiny)
        a_g = attn_g * leaf_mask[:, None, :]
        if self.renormalize:
            a_g = a_g / a_g.sum(-1, keepdim=True).clamp_min(torch.finfo(d.dtype).tiny)
        B, T, V = p_voc.shape
        merged = torch.zeros(B, T, V + n_ext, dtype=d.dtype, device=d.device)
        merged[..., :V] = gate[..., 0:1] * p_voc
        merged = merged.scatter_add(2, code_ext[:, None, :].expand(-1, T, -1), gate[..., 1:2] * a_c)
        merged = merged.scatter_add(2, sel_ext[:, None, :].expand(-1, T, -1), gate[..., 2:3] * a_g)
        return {"gate": gate, "p_voc": p_voc, "a_c": a_c, "a_g": a_g, "merged": merged}
