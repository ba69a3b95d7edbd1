"""Fusion decoder: masked self-attention, hybrid attention over both encoders, feedforward."""
from __future__ import annotations

import torch
from torch import nn

from ..errors import LengthError
from ..frontend.tokenizer import PAD
from .layers import FeedForward, MultiHeadAttention, uniform_fan_in_


class DecoderLayer(nn.Module):
    """Post-LN transformer decoder layer whose cross-attention is split per encoder.

    The two cross-attention outputs are concatenated, passed through tanh and
    mapped 2*d_e -> d_e by ``W_ff``; a standard feedforward block follows when
    ``fusion_ffn`` is on.
    """

    def __init__(self, d_e, heads, d_ff, dropout, fusion_ffn=True):
        super().__init__()
        dk = d_e // heads
        self.self_attn = MultiHeadAttention(d_e, heads, dk, dk, d_e)
        self.norm1 = nn.LayerNorm(d_e)
        self.attn_c = MultiHeadAttention(d_e, heads, dk, dk, d_e)
        self.attn_g = MultiHeadAttention(d_e, heads, dk, dk, d_e)
        self.W_ff = uniform_fan_in_(nn.Linear(2 * d_e, d_e))
        self.norm2 = nn.LayerNorm(d_e)
        self.ffn = FeedForward(d_e, d_ff, dropout) if fusion_ffn else None
        self.norm3 = nn.LayerNorm(d_e) if fusion_ffn else None
        self.drop = nn.Dropout(dropout)

    def forward(self, x, H_c, mask_c, H_g, mask_g, self_keys=None, self_mask=None):
        """x (B, T, d) queries; keys for self-attention default to x itself.

        Returns (out (B, T, d), head-averaged weights over H_c (B, T, l_c) and H_g (B, T, l_g)).
        """
        keys = x if self_keys is None else self_keys
        a, _ = self.self_attn(x, keys, self_mask)
        x = self.norm1(x + a)
        c, wc = self.attn_c(x, H_c, mask_c[:, None, :])
        g, wg = self.attn_g(x, H_g, mask_g[:, None, :])
        y = self.W_ff(torch.tanh(torch.cat([c, g], dim=-1)))
        x = self.norm2(x + self.drop(y))
        if self.ffn is not None:
            x = self.norm3(x + self.drop(self.ffn(x)))
        return x, wc.mean(1), wg.mean(1)

    def step(self, d_prev, D_prev, H_c, mask_c, H_g, mask_g):
        """Single position: ``d_prev`` (B, d) attends over ``D_prev`` (B, t-1, d) and itself."""
        q = d_prev[:, None, :]
        keys = torch.cat([D_prev, q], dim=1) if D_prev is not None and D_prev.shape[1] else q
        out, wc, wg = self.forward(q, H_c, mask_c, H_g, mask_g, self_keys=keys)
        return out[:, 0], wc[:, 0], wg[:, 0]


def causal_mask(T, device=None):
    return torch.tril(torch.ones(T, T, dtype=torch.bool, device=device))[None]


class Decoder(nn.Module):
    def __init__(self, cfg, vocab_size):
        super().__init__()
        self.cfg = cfg
        self.embedding = nn.Embedding(vocab_size, cfg.d_e, padding_idx=PAD)
        self.position = nn.Embedding(cfg.l_s, cfg.d_e)
        self.drop = nn.Dropout(cfg.dropout)
        self.layers = nn.ModuleList(
            DecoderLayer(cfg.d_e, cfg.heads_d, cfg.d_ff_d, cfg.dropout, cfg.fusion_ffn)
            for _ in range(cfg.L_d))

    def forward(self, dec_in, H_c, mask_c, H_g, mask_g):
        """Teacher-forced pass. Returns (d_t (B, T, d_e), attn_c (B, T, l_c), attn_g (B, T, l_g))."""
        T = dec_in.shape[1]
        if T > self.cfg.l_s:
            raise LengthError(f"target length {T} exceeds l_s={self.cfg.l_s}")
        pos = torch.arange(T, device=dec_in.device)
        x = self.drop(self.embedding(dec_in) + self.position(pos)[None])
        mask = causal_mask(T, dec_in.device)
        wc = wg = None
        for layer in self.layers:
            x, wc, wg = layer(x, H_c, mask_c, H_g, mask_g, self_mask=mask)
        return x, wc, wg
