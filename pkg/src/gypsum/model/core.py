"""The full summarizer: shared token table, both encoders, fusion decoder and copy head."""
from __future__ import annotations

import torch
from torch import nn

from ..frontend.tokenizer import PAD, UNK
from .cencoder import CEncoder
from .copygen import COPY_BRANCHES, CopyGenerator
from .decoder import Decoder
from .gencoder import GEncoder


class GypSum(nn.Module):
    def __init__(self, cfg, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.token_embedding = nn.Embedding(vocab_size, cfg.d_model, padding_idx=PAD)
        self.cencoder = CEncoder(cfg, self.token_embedding)
        self.gencoder = GEncoder(cfg, self.token_embedding)
        self.decoder = Decoder(cfg, vocab_size)
        self.copy = CopyGenerator(cfg.d_e, vocab_size, cfg.copy_mode, cfg.renormalize_leaf_copy)

    def encode(self, batch):
        """Returns (H_c, H_g, gat alphas per layer)."""
        H_c = self.cencoder(batch.code_ids, batch.code_mask)
        H_g, _, alphas = self.gencoder(batch.graph)
        return H_c, H_g, alphas

    def decode(self, dec_in, batch, H_c, H_g, copy_mode=None):
        d, wc, wg = self.decoder(dec_in, H_c.states, H_c.mask, H_g.states, H_g.mask)
        out = self.copy(d, wc, wg, batch.code_ext, batch.code_mask, batch.sel_ext,
                        batch.leaf_mask, batch.n_ext, copy_mode)
        out["attn_c"], out["attn_g"] = wc, wg
        return out

    def forward(self, batch, copy_mode=None):
        H_c, H_g, _ = self.encode(batch)
        return self.decode(batch.dec_in, batch, H_c, H_g, copy_mode)

    def loss(self, batch, copy_mode=None):
        from ..training import nll_loss
        out = self.forward(batch, copy_mode)
        targets = batch.targets
        if not any(COPY_BRANCHES[copy_mode or self.cfg.copy_mode][1:]):
            # nothing can be copied, so source-only tokens fall back to UNK
            targets = targets.masked_fill(targets >= self.vocab_size, UNK)
        return nll_loss(out["merged"], targets, batch.tgt_mask)
