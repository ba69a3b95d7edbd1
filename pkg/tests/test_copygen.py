import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gypsum.errors import DegenerateMask
from gypsum.model import CopyGenerator, copy_dists, gate_probs, token_dist


def test_gate_examples():
    g = gate_probs(torch.ones(4), torch.zeros(3, 4))
    torch.testing.assert_close(g, torch.full((3,), 1 / 3, dtype=g.dtype))
    g = gate_probs(torch.tensor([1.0]), torch.tensor([[math.log(2)], [0.0], [0.0]]))
    torch.testing.assert_close(g, torch.tensor([0.5, 0.25, 0.25]))
    assert gate_probs(torch.ones(2), torch.randn(3, 2), (True, False, False)).tolist() == [1.0, 0.0, 0.0]


@given(st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_gate_is_a_simplex(d):
    g = gate_probs(torch.tensor(d, dtype=torch.float64), torch.eye(3, dtype=torch.float64))
    assert torch.all(g > 0) and abs(float(g.sum()) - 1) < 1e-12


def test_copy_dists_examples():
    a_c, a_g = copy_dists([0.25] * 4, [0.5, 0.5], [False, True], ([True] * 4, [True, True]))
    assert a_c.tolist() == [0.25] * 4
    assert a_g.tolist() == [0.0, 1.0]
    with pytest.raises(DegenerateMask):
        copy_dists([1.0], [1.0], [True], ([False], [True]))
    with pytest.raises(DegenerateMask):
        copy_dists([1.0], [0.5, 0.5], [False, False], ([True], [True, True]))


def test_token_dist_hand_example():
    merged = token_dist((0.5, 0.3, 0.2), {"y": 0.2, "z": 0.8}, [0.1, 0.9], [0.05, 0.05, 0.9],
                        ["y", "w"], ["y", "y", "q"])
    assert abs(merged["y"] - 0.15) < 1e-12
    assert abs(sum(merged.values()) - 1) < 1e-12


def test_token_dist_pure_branches():
    p_voc = {"a": 0.3, "b": 0.7}
    assert token_dist((1, 0, 0), p_voc, [1.0], [1.0], ["zz"], ["zz"]) == {"a": 0.3, "b": 0.7, "zz": 0.0}
    assert token_dist((0, 1, 0), p_voc, [1.0], [1.0], ["zz"], ["q"])["zz"] == 1.0


def random_head(seed, V=6, Lc=4, Lg=5, n_ext=2):
    g = torch.Generator().manual_seed(seed)
    head = CopyGenerator(3, V).double()
    with torch.no_grad():
        for p in head.parameters():
            p.normal_(0, 1, generator=g)
    d = torch.randn(1, 1, 3, generator=g, dtype=torch.float64)
    attn_c = torch.softmax(torch.randn(1, 1, Lc, generator=g, dtype=torch.float64), -1)
    attn_g = torch.softmax(torch.randn(1, 1, Lg, generator=g, dtype=torch.float64), -1)
    code_ext = torch.randint(0, V + n_ext, (1, Lc), generator=g)
    sel_ext = torch.randint(0, V + n_ext, (1, Lg), generator=g)
    code_mask = torch.tensor([[True, True, True, False]])
    leaf_mask = torch.tensor([[True, False, True, True, False]])
    return head, (d, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext)


@pytest.mark.parametrize("seed", range(5))
def test_merged_matches_scalar_oracle(seed):
    head, args = random_head(seed)
    merged = head(*args)["merged"][0, 0].tolist()
    d, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext = args
    want = oracles.merged_distribution(d[0, 0].tolist(), head.W_gen.weight.tolist(), head.W_voc.weight.tolist(),
                                       attn_c[0, 0].tolist(), attn_g[0, 0].tolist(), code_ext[0].tolist(),
                                       code_mask[0].tolist(), sel_ext[0].tolist(), leaf_mask[0].tolist(), n_ext)
    assert max(abs(a - b) for a, b in zip(merged, want)) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["dual", "code", "graph", "none"]))
def test_merged_is_a_distribution(seed, mode):
    head, args = random_head(seed)
    with torch.no_grad():
        out = head(*args, copy_mode=mode)
    m = out["merged"]
    assert torch.all(m >= 0)
    assert abs(float(m.sum()) - 1) < 1e-6
    torch.testing.assert_close(out["gate"].sum(-1), torch.ones(1, 1, dtype=torch.float64))


def test_oov_source_token_gets_mass():
    head, args = random_head(0)
    d, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext = args
    code_ext = code_ext.clone()
    code_ext[0, 0] = 6          # first extended id
    m = head(d, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext)["merged"]
    assert m[0, 0, 6] > 0
    m = head(d, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext, copy_mode="none")["merged"]
    assert m[0, 0, 6:].sum() == 0
