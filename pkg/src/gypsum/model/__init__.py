from .cencoder import CEncoder, encode_tokens, load_pretrained_adapter
from .copygen import COPY_BRANCHES, CopyGenerator, copy_dists, gate_probs, token_dist
from .core import GypSum
from .decoder import Decoder, DecoderLayer, causal_mask
from .gencoder import GATLayer, GEncoder, GraphBatch, edge_softmax
from .layers import EncoderOutput, MultiHeadAttention, masked_softmax

__all__ = [
    "CEncoder", "encode_tokens", "load_pretrained_adapter", "COPY_BRANCHES", "CopyGenerator",
    "copy_dists", "gate_probs", "token_dist", "GypSum", "Decoder", "DecoderLayer", "causal_mask",
    "GATLayer", "GEncoder", "GraphBatch", "edge_softmax", "EncoderOutput", "MultiHeadAttention",
    "masked_softmax",
]
