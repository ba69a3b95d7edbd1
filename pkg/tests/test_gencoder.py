
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from gypsum.data import KindVocab, collate, prepare_example
from gypsum.frontend import SourceSnippet, extend_ast, parse_source
from gypsum.graph import EdgeType, build_graph
from gypsum.model import GATLayer, GEncoder, GraphBatch, edge_softmax

from conftest import make_setup, tiny_config


def gat_instance(seed=0):
    g = torch.Generator().manual_seed(seed)
    h = torch.randn(2, 2, generator=g, dtype=torch.float64)
    W = torch.randn(2, 2, generator=g, dtype=torch.float64) * 0.5
    We = torch.randn(5, 1, 2, generator=g, dtype=torch.float64) * 0.5
    # self loops, one edge each way, and a parallel second edge 0 -> 1
    src = torch.tensor([0, 1, 0, 1, 0])
    dst = torch.tensor([0, 1, 1, 0, 1])
    layer = GATLayer(2, 1, 2, last=True).double()
    with torch.no_grad():
        layer.attn.copy_(torch.randn(1, 6, generator=g, dtype=torch.float64))
    return layer, h, W, We, src, dst


def test_two_node_layer_matches_scalar_oracle():
    for seed in range(5):
        layer, h, W, We, src, dst = gat_instance(seed)
        out, alpha = layer(h, (h @ W.T).view(2, 1, 2), We, src, dst)
        want, want_alpha = oracles.gat_layer(h.tolist(), W.tolist(), We[:, 0].tolist(),
                                             layer.attn[0].tolist(), list(zip(src.tolist(), dst.tolist())))
        assert max(abs(a - b) for a, b in zip(alpha[:, 0].tolist(), want_alpha)) < 1e-10
        assert max(abs(a - b) for r, w in zip(out.tolist(), want) for a, b in zip(r, w)) < 1e-10


def test_activation_outside_variant_differs():
    layer, h, W, We, src, dst = gat_instance()
    inside, _ = layer(h, (h @ W.T).view(2, 1, 2), We, src, dst)
    layer.activation_outside = True
    outside, _ = layer(h, (h @ W.T).view(2, 1, 2), We, src, dst)
    assert not torch.allclose(inside, outside)


def test_singleton_softmax_and_path_rows():
    s = torch.tensor([[3.0]])
    assert edge_softmax(s, torch.tensor([0]), 1).item() == 1.0
    # path 0-1-2: the middle node has 3 incident terms (two neighbours and itself)
    dst = torch.tensor([1, 1, 1, 0, 2])
    a = edge_softmax(torch.randn(5, 2), dst, 3)
    torch.testing.assert_close(a[:3].sum(0), torch.ones(2))


def test_attention_rows_sum_to_one(setup):
    cfg, vocab, kinds, model, examples, batch = setup
    _, alphas = model.gencoder.run_layers(batch.graph)
    dst = batch.graph.edge_dst
    for alpha in alphas:
        z = torch.zeros(batch.graph.num_nodes, alpha.shape[1], dtype=alpha.dtype).index_add(0, dst, alpha)
        assert torch.allclose(z, torch.ones_like(z), atol=1e-6)


def test_initial_states(setup):
    cfg, vocab, kinds, model, examples, batch = setup
    gb = batch.graph
    h0 = model.gencoder.init_states(gb)
    assert h0.shape == (gb.num_nodes, cfg.h_g)
    internal = (~gb.node_leaf).nonzero().flatten().tolist()
    by_kind = {}
    for i in internal:
        by_kind.setdefault(int(gb.node_kind[i]), []).append(i)
    pairs = [v for v in by_kind.values() if len(v) > 1]
    assert pairs
    for rows in pairs:
        assert torch.equal(h0[rows[0]], h0[rows[1]])
    # leaves read the shared token table
    leaf = int(gb.node_leaf.nonzero()[0])
    with torch.no_grad():
        model.token_embedding.weight[gb.node_tok[leaf]] += 1.0
    assert not torch.equal(model.gencoder.init_states(gb)[leaf], h0[leaf])


def test_self_only_graph_has_no_cross_node_flow(setup):
    cfg, vocab, kinds, model, examples, batch = setup
    gb = batch.graph
    keep = gb.edge_type == int(EdgeType.Self)
    alone = GraphBatch(gb.node_kind, gb.node_tok.clone(), gb.node_leaf, gb.edge_src[keep],
                       gb.edge_dst[keep], gb.edge_type[keep], gb.sel_index, gb.sel_mask)
    states, _ = model.gencoder.run_layers(alone)
    leaf = int(gb.node_leaf.nonzero()[0])
    alone.node_tok[leaf] = (alone.node_tok[leaf] + 1) % len(vocab)
    changed, _ = model.gencoder.run_layers(alone)
    diff = (states[-1] - changed[-1]).abs().sum(1)
    assert diff[leaf] > 0
    assert torch.all(diff[torch.arange(gb.num_nodes) != leaf] == 0)


def test_output_shape_and_padding():
    cfg = tiny_config(l_g=300)
    cfg, vocab, kinds, model, examples, batch = make_setup(cfg, n=1)
    H_g, _, _ = model.gencoder(batch.graph)
    n = len(examples[0].selected)
    assert H_g.states.shape == (1, 300, cfg.d_e)
    assert int(H_g.mask.sum()) == n
    assert torch.all(H_g.states[0, n:] == 0)


def test_projection_for_unequal_widths():
    cfg, vocab, kinds, model, examples, batch = make_setup(tiny_config(h_g=12, head_g=3), n=2)
    H_g, states, _ = model.gencoder(batch.graph)
    assert states[-1].shape[1] == 12 and H_g.states.shape[-1] == cfg.d_e


CODE = [("int add(int a, int b) { if (a > b) { return a; } return a + b; }", "java"),
        ("def f(xs):\n    t = 0\n    for x in xs:\n        t += x\n    return t\n", "python")]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1), st.randoms(use_true_random=False))
def test_relabelled_graph_gives_identical_output(which, rnd):
    cfg, vocab, kinds, model, _, _ = make_setup(n=4)
    code, lang = CODE[which]
    snippet = SourceSnippet(code, lang)
    ast = extend_ast(parse_source(snippet), vocab, lang)
    ids = [n.id for n in ast.nodes]
    perm = ids[:]
    rnd.shuffle(perm)
    other = ast.relabel(dict(zip(ids, [p + 1000 for p in perm])))
    other.nodes = rnd.sample(other.nodes, len(other.nodes))
    other.__post_init__()
    outs = []
    for tree in (ast, other):
        ex = prepare_example(snippet, vocab, kinds, cfg, grow_kinds=True, graph=build_graph(tree))
        H_g, _, _ = model.gencoder(collate([ex], cfg, len(vocab)).graph)
        outs.append(H_g.states)
    assert torch.equal(outs[0], outs[1])
