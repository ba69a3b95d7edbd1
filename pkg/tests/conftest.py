import sys
from pathlib import Path

import pytest
import torch

from gypsum.config import preset
from gypsum.data import KindVocab, build_vocab, collate, prepare_corpus, read_jsonl
from gypsum.model import GypSum

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
sys.path.insert(0, str(HERE))


def tiny_config(**kw):
    base = dict(d_e=8, d_model=8, d_k=4, d_v=4, d_ff=16, L_c=1, head_c=2, L_g=2, head_g=2, h_g=8,
                d_t=4, d_edge=4, L_d=1, heads_d=2, d_ff_d=16, l_c=24, l_g=24, l_s=12, dropout=0.0)
    base.update(kw)
    return preset("desk", **base)


def make_setup(cfg=None, seed=0, dtype=torch.float64, path=FIXTURES / "overfit10.jsonl", n=4):
    """Model, prepared examples and a collated batch over the first ``n`` fixture records."""
    cfg = cfg or tiny_config()
    snippets = read_jsonl(path)[:n]
    vocab = build_vocab(snippets, cfg)
    kinds = KindVocab(capacity=cfg.max_kinds)
    examples, _ = prepare_corpus(snippets, vocab, kinds, cfg, grow_kinds=True)
    torch.manual_seed(seed)
    model = GypSum(cfg, len(vocab)).to(dtype)
    model.eval()
    return cfg, vocab, kinds, model, examples, collate(examples, cfg, len(vocab))


@pytest.fixture
def setup():
    return make_setup()


@pytest.fixture(scope="session")
def overfit_snippets():
    return read_jsonl(FIXTURES / "overfit10.jsonl")
