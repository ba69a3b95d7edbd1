from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn


def masked_softmax(scores: torch.Tensor, mask: torch.Tensor | None, dim: int = -1) -> torch.Tensor:
    """Softmax with masked entries (mask == False) set to exactly zero.

    Rows with no valid entry come out all-zero instead of NaN.
    """
    if mask is None:
        return torch.softmax(scores, dim=dim)
    mask = mask.expand_as(scores)
    filled = scores.masked_fill(~mask, torch.finfo(scores.dtype).min)
    top = filled.amax(dim=dim, keepdim=True).detach()
    e = torch.exp(filled - top) * mask
    return e / e.sum(dim=dim, keepdim=True).clamp_min(torch.finfo(scores.dtype).tiny)


def uniform_fan_in_(linear: nn.Linear) -> nn.Linear:
    bound = 1.0 / math.sqrt(linear.in_features)
    nn.init.uniform_(linear.weight, -bound, bound)
    if linear.bias is not None:
        nn.init.zeros_(linear.bias)
    return linear


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention returning per-head weights."""

    def __init__(self, d_query, heads, d_k, d_v, d_out, d_kv=None):
        super().__init__()
        d_kv = d_query if d_kv is None else d_kv
        self.heads, self.d_k, self.d_v = heads, d_k, d_v
        self.q = nn.Linear(d_query, heads * d_k)
        self.k = nn.Linear(d_kv, heads * d_k)
        self.v = nn.Linear(d_kv, heads * d_v)
        self.o = nn.Linear(heads * d_v, d_out)

    def forward(self, query, keys, mask=None):
        """query (B, Lq, d), keys (B, Lk, d), mask broadcastable to (B, Lq, Lk); True = visible.

        Returns (output (B, Lq, d_out), weights (B, heads, Lq, Lk)).
        """
        B, Lq, _ = query.shape
        Lk = keys.shape[1]
        q = self.q(query).view(B, Lq, self.heads, self.d_k).transpose(1, 2)
        k = self.k(keys).view(B, Lk, self.heads, self.d_k).transpose(1, 2)
        v = self.v(keys).view(B, Lk, self.heads, self.d_v).transpose(1, 2)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.d_k)
        if mask is not None:
            mask = mask.unsqueeze(1) if mask.dim() == 3 else mask
        w = masked_softmax(scores, mask)
        out = (w @ v).transpose(1, 2).reshape(B, Lq, self.heads * self.d_v)
        return self.o(out), w


class FeedForward(nn.Module):
    def __init__(self, d, d_ff, dropout):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(d, d_ff), nn.ReLU(), nn.Dropout(dropout), nn.Linear(d_ff, d))

    def forward(self, x):
        return self.net(x)


@dataclass
class EncoderOutput:
    """Batched encoder states ``(B, L, d_e)`` with validity mask ``(B, L)``."""

    states: torch.Tensor
    mask: torch.Tensor

    @property
    def matrix(self) -> torch.Tensor:
        """Column-per-position view, ``d_e x L`` (first batch item when batched)."""
        s = self.states[0] if self.states.dim() == 3 else self.states
        return s.transpose(0, 1)

    def __getitem__(self, i) -> "EncoderOutput":
        return EncoderOutput(self.states[i:i + 1], self.mask[i:i + 1])
