"""Scalar brute-force evaluations used as independent oracles.

Everything here works on plain Python floats and nested lists; tensors are
converted with ``tolist`` before the call.
"""
import math


def matvec(W, x):
    return [sum(w * v for w, v in zip(row, x)) for row in W]


def linear(W, b, x):
    y = matvec(W, x)
    return y if b is None else [a + c for a, c in zip(y, b)]


def softmax(xs):
    top = max(xs)
    e = [math.exp(x - top) for x in xs]
    z = sum(e)
    return [v / z for v in e]


def elu(x):
    return x if x > 0 else math.exp(x) - 1.0


def leaky(x, slope=0.2):
    return x if x > 0 else slope * x


def layer_norm(x, gamma, beta, eps=1e-5):
    mu = sum(x) / len(x)
    var = sum((v - mu) ** 2 for v in x) / len(x)
    return [g * (v - mu) / math.sqrt(var + eps) + b for v, g, b in zip(x, gamma, beta)]


# ---------------------------------------------------------------- graph attention

def gat_layer(h, W, We, a, edges):
    """One head, last-layer form: returns (h', alpha per edge).

    h: node states; W: projection rows; We: projected edge vectors per edge;
    a: attention vector of length 3*d; edges: (src, dst) pairs.
    """
    d = len(W)
    Wh = [matvec(W, hi) for hi in h]
    scores = []
    for k, (s, t) in enumerate(edges):
        x = (sum(a[i] * Wh[t][i] for i in range(d)) + sum(a[d + i] * Wh[s][i] for i in range(d))
             + sum(a[2 * d + i] * We[k][i] for i in range(d)))
        scores.append(leaky(x))
    alpha = [0.0] * len(edges)
    for node in range(len(h)):
        incident = [k for k, (_, t) in enumerate(edges) if t == node]
        for k, p in zip(incident, softmax([scores[k] for k in incident])):
            alpha[k] = p
    out = [[0.0] * len(h[0]) for _ in h]
    for k, (s, t) in enumerate(edges):
        for i in range(len(h[0])):
            out[t][i] += elu(alpha[k] * h[s][i])
    return out, alpha


# ---------------------------------------------------------------- decoder

def attention(p, queries, keys, visible):
    """Single-head attention with parameters dict p (q/k/v/o weight+bias)."""
    outs, weights = [], []
    for qi, q in enumerate(queries):
        qv = linear(p["q.weight"], p["q.bias"], q)
        cols = [j for j in range(len(keys)) if visible(qi, j)]
        scores = [sum(x * y for x, y in zip(qv, linear(p["k.weight"], p["k.bias"], keys[j])))
                  / math.sqrt(len(qv)) for j in cols]
        w = softmax(scores)
        row = [0.0] * len(keys)
        for j, wj in zip(cols, w):
            row[j] = wj
        mix = [0.0] * len(p["v.bias"])
        for j, wj in zip(cols, w):
            v = linear(p["v.weight"], p["v.bias"], keys[j])
            mix = [m + wj * x for m, x in zip(mix, v)]
        outs.append(linear(p["o.weight"], p["o.bias"], mix))
        weights.append(row)
    return outs, weights


def decoder_layer(params, x, H_c, mask_c, H_g, mask_g):
    """Post-LN decoder layer with split cross-attention, tanh fusion, feedforward."""
    sub = lambda prefix: {k[len(prefix) + 1:]: v for k, v in params.items() if k.startswith(prefix + ".")}
    a, _ = attention(sub("self_attn"), x, x, lambda i, j: j <= i)
    x = [layer_norm([u + v for u, v in zip(xi, ai)], params["norm1.weight"], params["norm1.bias"])
         for xi, ai in zip(x, a)]
    c, wc = attention(sub("attn_c"), x, H_c, lambda i, j: mask_c[j])
    g, wg = attention(sub("attn_g"), x, H_g, lambda i, j: mask_g[j])
    out = []
    for xi, ci, gi in zip(x, c, g):
        y = linear(params["W_ff.weight"], params["W_ff.bias"], [math.tanh(v) for v in ci + gi])
        xi = layer_norm([u + v for u, v in zip(xi, y)], params["norm2.weight"], params["norm2.bias"])
        if "ffn.net.0.weight" in params:
            hdn = [max(0.0, v) for v in linear(params["ffn.net.0.weight"], params["ffn.net.0.bias"], xi)]
            f = linear(params["ffn.net.3.weight"], params["ffn.net.3.bias"], hdn)
            xi = layer_norm([u + v for u, v in zip(xi, f)], params["norm3.weight"], params["norm3.bias"])
        out.append(xi)
    return out, wc, wg


# ---------------------------------------------------------------- copy head and loss

def merged_distribution(d, W_gen, W_voc, attn_c, attn_g, code_ext, code_mask, sel_ext, leaf_mask, n_ext):
    gate = softmax(matvec(W_gen, d))
    p_voc = softmax(matvec(W_voc, d))
    a_c = [a * m for a, m in zip(attn_c, code_mask)]
    a_c = [a / sum(a_c) for a in a_c]
    a_g = [a * m for a, m in zip(attn_g, leaf_mask)]
    a_g = [a / sum(a_g) for a in a_g]
    out = [gate[0] * p for p in p_voc] + [0.0] * n_ext
    for tok, a in zip(code_ext, a_c):
        out[tok] += gate[1] * a
    for tok, a in zip(sel_ext, a_g):
        out[tok] += gate[2] * a
    return out


def nll(prob_rows):
    """prob_rows: per sequence, the target probabilities of its unpadded steps."""
    return -sum(math.log(p) for row in prob_rows for p in row) / len(prob_rows)


def attribution(gat_alpha, edges, sel, leaves, dec_attn_g):
    """entry(j, i) = sum_p alpha(leaf i -> selected node p) * dec_attn(token j -> p)."""
    out = [[0.0] * len(leaves) for _ in dec_attn_g]
    for j, row in enumerate(dec_attn_g):
        for i, leaf in enumerate(leaves):
            for p, node in enumerate(sel):
                w = sum(al for al, (s, t) in zip(gat_alpha, edges) if s == leaf and t == node)
                out[j][i] += w * row[p]
    return out


# ---------------------------------------------------------------- finite differences

def gradient_check(model, loss_fn, n=50, seed=0, eps=1e-5, floor=1e-7):
    """Compare autograd with central differences on ``n`` random scalar parameters.

    Returns a list of (name, index, analytic, numeric, relative error). The step
    is sized for losses of order 10 in float64: smaller steps lose digits to
    cancellation on parameters with gradients near 1e-7.
    """
    import random

    import torch

    named = [(k, p) for k, p in model.named_parameters() if p.requires_grad]
    model.zero_grad()
    loss_fn().backward()
    rnd = random.Random(seed)
    sizes = [p.numel() for _, p in named]
    picks = []
    for _ in range(n):
        k = rnd.choices(range(len(named)), weights=sizes)[0]
        picks.append((k, rnd.randrange(sizes[k])))
    out = []
    with torch.no_grad():
        for k, i in picks:
            name, p = named[k]
            flat = p.view(-1)
            old = float(flat[i])
            flat[i] = old + eps
            up = float(loss_fn())
            flat[i] = old - eps
            down = float(loss_fn())
            flat[i] = old
            numeric = (up - down) / (2 * eps)
            analytic = float(p.grad.view(-1)[i])
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            out.append((name, i, analytic, numeric, rel))
    return out
