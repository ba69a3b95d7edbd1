"""Token-sequence encoder: a transformer encoder stack followed by the W_c projection."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import LengthError, MissingFile, ShapeMismatch
from .layers import EncoderOutput, FeedForward, MultiHeadAttention, uniform_fan_in_


class EncoderLayer(nn.Module):
    def __init__(self, d_model, heads, d_k, d_v, d_ff, dropout):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, heads, d_k, d_v, d_model)
        self.norm1 = nn.LayerNorm(d_model)
        self.ffn = FeedForward(d_model, d_ff, dropout)
        self.drop = nn.Dropout(dropout)
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, x, mask):
        a, _ = self.attn(x, x, mask[:, None, :])
        x = self.norm1(x + a)
        return self.norm2(x + self.drop(self.ffn(x)))


class CEncoder(nn.Module):
    """Learned absolute positions, post-LN layers, then ``H_c = W_c . H~_c``.

    ``token_embedding`` is owned by the caller so the graph encoder can share it.
    """

    def __init__(self, cfg, token_embedding: nn.Embedding):
        super().__init__()
        self.cfg = cfg
        self.token_embedding = token_embedding
        self.position = nn.Embedding(cfg.l_c, cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)
        self.layers = nn.ModuleList(
            EncoderLayer(cfg.d_model, cfg.head_c, cfg.d_k, cfg.d_v, cfg.d_ff, cfg.dropout)
            for _ in range(cfg.L_c))
        self.proj = uniform_fan_in_(nn.Linear(cfg.d_model, cfg.d_e))

    def stack(self, ids, mask):
        """Pre-projection states H~_c, ``(B, L, d_model)``."""
        if ids.shape[1] > self.cfg.l_c:
            raise LengthError(f"token sequence of length {ids.shape[1]} exceeds l_c={self.cfg.l_c}")
        pos = torch.arange(ids.shape[1], device=ids.device)
        x = self.drop(self.token_embedding(ids) + self.position(pos)[None])
        for layer in self.layers:
            x = layer(x, mask)
        return x

    def forward(self, ids, mask) -> EncoderOutput:
        if self.cfg.freeze_encoder:
            with torch.no_grad():
                h = self.stack(ids, mask)
        else:
            h = self.stack(ids, mask)
        out = self.proj(h) * mask[..., None].to(h.dtype)
        return EncoderOutput(out, mask)

    # ------------------------------------------------------------ adapter

    def external_keys(self) -> dict[str, tuple]:
        """Key schema for pre-trained weights: every stack parameter except W_c."""
        keys = {"token_embedding.weight": tuple(self.token_embedding.weight.shape)}
        for name, p in self.named_parameters():
            if name.startswith("proj.") or name.startswith("token_embedding."):
                continue
            keys[name] = tuple(p.shape)
        return keys

    def load_external(self, params: dict) -> None:
        expected = self.external_keys()
        missing = sorted(set(expected) - set(params))
        if missing:
            raise ShapeMismatch(f"pre-trained archive lacks keys: {', '.join(missing[:5])}")
        own = dict(self.named_parameters())
        with torch.no_grad():
            for name, shape in expected.items():
                value = torch.as_tensor(np.asarray(params[name]))
                if tuple(value.shape) != shape:
                    raise ShapeMismatch(f"{name}: archive shape {tuple(value.shape)} != expected {shape}")
                own[name].copy_(value.to(own[name].dtype))


def load_pretrained_adapter(weights_path, cfg=None) -> dict:
    """Load an external encoder archive (``.npz`` or a torch-saved dict of arrays).

    Keys follow :meth:`CEncoder.external_keys`; an optional scalar ``__d_model__``
    entry is checked against ``cfg.d_model`` before anything else.
    """
    path = Path(weights_path)
    if not path.exists():
        raise MissingFile(f"pre-trained weights not found: {path}")
    if path.suffix == ".npz":
        with np.load(path, allow_pickle=False) as z:
            params = {k: z[k] for k in z.files}
    else:
        params = dict(torch.load(path, map_location="cpu", weights_only=True))
    width = params.pop("__d_model__", None)
    if width is None and "token_embedding.weight" in params:
        width = np.shape(params["token_embedding.weight"])[-1]
    if cfg is not None and width is not None and int(np.asarray(width)) != cfg.d_model:
        raise ShapeMismatch(f"archive d_model={int(np.asarray(width))} but config d_model={cfg.d_model}")
    return params


def encode_tokens(seq, cfg, encoder: CEncoder) -> EncoderOutput:
    """Encode one :class:`TokenSequence` into a padded ``d_e x l_c`` output."""
    if len(seq.ids) > cfg.l_c:
        raise LengthError(f"token sequence of length {len(seq.ids)} exceeds l_c={cfg.l_c}")
    ids = torch.zeros(1, cfg.l_c, dtype=torch.long)
    ids[0, : len(seq.ids)] = torch.tensor(seq.ids, dtype=torch.long)
    mask = torch.zeros(1, cfg.l_c, dtype=torch.bool)
    mask[0, : len(seq.ids)] = True
    return encoder(ids, mask)
