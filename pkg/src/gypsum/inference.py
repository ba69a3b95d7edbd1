"""Beam search and greedy decoding over the merged distribution, plus leaf attribution."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .data import collate, decoder_inputs, prepare_example
from .frontend import EOS, SourceSnippet
from .model.layers import EncoderOutput


@dataclass
class SummaryHypothesis:
    ids: list                      # extended ids, EOS included when generated
    tokens: list                   # surface tokens, EOS excluded
    logprob: float
    score: float
    steps: list = field(default_factory=list)   # per step (a_c row, a_g row)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass
class AttributionMatrix:
    tokens: list
    leaves: list
    matrix: np.ndarray             # (len(tokens), len(leaves))

    def to_json(self) -> str:
        return json.dumps({"tokens": self.tokens, "leaves": self.leaves,
                           "matrix": self.matrix.tolist()})


def rank_score(logprob: float, length: int, length_norm: bool) -> float:
    return logprob / length if length_norm and length else logprob


def _best_reachable(logprob: float, length: int, max_len: int, length_norm: bool) -> float:
    # Further steps only add non-positive log-probability; with length
    # normalization the most favourable outcome stretches to max_len.
    if not length_norm:
        return logprob
    if logprob >= 0:
        return 0.0
    return logprob / max_len


def beam_decode(step_fn, k: int, max_len: int, length_norm: bool = True, eos: int = EOS):
    """Generic beam search.

    ``step_fn(prefixes)`` receives a list of id lists and returns
    (log-probabilities (n, V') as a tensor or array, per-prefix extras).
    Returns up to ``k`` finished ``(ids, logprob, score, extras)`` tuples, best first.
    Hypotheses end on ``eos`` or at ``max_len`` tokens.
    """
    if k < 1:
        raise ValueError("beam size must be >= 1")
    alive = [([], 0.0, [])]
    finished = []
    for t in range(max_len):
        logp, extras = step_fn([h[0] for h in alive])
        logp = torch.as_tensor(logp, dtype=torch.float64)
        cands = []
        for h, (ids, lp, ex) in enumerate(alive):
            row = logp[h]
            vals, idx = torch.sort(row, descending=True, stable=True)
            for v, tok in zip(vals[:k].tolist(), idx[:k].tolist()):
                if v == -math.inf:
                    break
                cands.append((lp + v, h, tok))
        # stable: ties keep parent order, then token order
        cands.sort(key=lambda c: -c[0])
        alive_next = []
        for lp, h, tok in cands[:k]:
            ids = alive[h][0] + [tok]
            ex = alive[h][2] + [extras[h] if extras is not None else None]
            if tok == eos or len(ids) == max_len:
                finished.append((ids, lp, rank_score(lp, len(ids), length_norm), ex))
            else:
                alive_next.append((ids, lp, ex))
        alive = alive_next
        if not alive:
            break
        if len(finished) >= k:
            kth = sorted(f[2] for f in finished)[-k]
            best_open = max(_best_reachable(lp, len(ids), max_len, length_norm)
                            for ids, lp, _ in alive)
            if best_open <= kth:
                break
    finished.sort(key=lambda f: -f[2])
    return finished[:k]


class Summarizer:
    """Decoding front end over a trained model (anything with cfg/vocab/kinds/model)."""

    def __init__(self, checkpoint):
        self.cfg, self.vocab = checkpoint.cfg, checkpoint.vocab
        self.kinds, self.model = checkpoint.kinds, checkpoint.model
        self.model.eval()

    def prepare(self, snippet: SourceSnippet):
        ex = prepare_example(snippet, self.vocab, self.kinds, self.cfg, grow_kinds=False)
        return ex, collate([ex], self.cfg, len(self.vocab))

    def _stepper(self, batch, copy_mode=None):
        model, V = self.model, len(self.vocab)
        with torch.no_grad():
            H_c, H_g, _ = model.encode(batch)

        def step(prefixes):
            n = len(prefixes)
            dec_in = torch.tensor([decoder_inputs(p + [EOS], V) for p in prefixes], dtype=torch.long)
            rows = torch.zeros(n, dtype=torch.long)
            sub = _rows(batch, rows)
            with torch.no_grad():
                out = model.decode(dec_in, sub, EncoderOutput(H_c.states[rows], H_c.mask[rows]),
                                   EncoderOutput(H_g.states[rows], H_g.mask[rows]), copy_mode)
            p = out["merged"][:, -1].double()
            logp = torch.log(p).masked_fill(p <= 0, -math.inf)
            extras = [(out["a_c"][i, -1].numpy(), out["a_g"][i, -1].numpy()) for i in range(n)]
            return logp, extras
        return step

    def _hypothesis(self, ex, ids, lp, score, steps):
        toks = [ex.token(i, self.vocab) for i in ids if i != EOS]
        return SummaryHypothesis(ids, toks, lp, score, steps)

    def beam_search(self, snippet, k=None, copy_mode=None) -> list[SummaryHypothesis]:
        ex, batch = self.prepare(snippet)
        k = k or self.cfg.beam_size
        found = beam_decode(self._stepper(batch, copy_mode), k, self.cfg.l_s, self.cfg.length_norm)
        return [self._hypothesis(ex, *f) for f in found]

    def greedy(self, snippet, copy_mode=None) -> SummaryHypothesis:
        ex, batch = self.prepare(snippet)
        step = self._stepper(batch, copy_mode)
        ids, lp, steps = [], 0.0, []
        for _ in range(self.cfg.l_s):
            logp, extras = step([ids])
            tok = int(torch.argmax(logp[0]))
            ids.append(tok)
            lp += float(logp[0, tok])
            steps.append(extras[0])
            if tok == EOS:
                break
        return self._hypothesis(ex, ids, lp, rank_score(lp, len(ids), self.cfg.length_norm), steps)

    def attribution(self, snippet, summary: str | None = None) -> AttributionMatrix:
        """entry (j, i) = sum_p gat_alpha(leaf i -> selected node p) * dec_attn(p -> token j).

        Both factors come from the last layer and are averaged over heads; edges
        from i into p are summed. Columns cover every leaf in pre-order.
        """
        if summary is not None:
            snippet = SourceSnippet(snippet.code, snippet.language, summary, snippet.id)
        ex, batch = self.prepare(snippet)
        if ex.targets is None:
            raise ValueError("attribution needs a summary")
        with torch.no_grad():
            H_c, H_g, alphas = self.model.encode(batch)
            out = self.model.decode(batch.dec_in, batch, H_c, H_g)
        alpha = alphas[-1].mean(1).double().numpy()
        attn_g = out["attn_g"][0].double().numpy()
        return attribution_matrix(ex, alpha, attn_g, self.vocab)


def attribution_matrix(ex, alpha, attn_g, vocab) -> AttributionMatrix:
    """Combine head-averaged last-layer edge weights ``alpha`` (E,) with decoder
    graph-attention rows ``attn_g`` (T, l_g) for one prepared example."""
    pos = {ex.rows[n]: p for p, n in enumerate(ex.selected)}
    link = np.zeros((len(ex.node_kind), attn_g.shape[1]))
    for (s, d), a in zip(ex.edges[:2].T, alpha):
        p = pos.get(int(d))
        if p is not None:
            link[int(s), p] += a
    leaves = ex.graph.ast.leaves()
    leaf_rows = [ex.rows[n] for n in leaves]
    n_tok = len(ex.summary_tokens or [])
    matrix = attn_g[:n_tok] @ link[leaf_rows].T
    return AttributionMatrix(list(ex.summary_tokens or []),
                             [ex.graph.ast.node(n).text for n in leaves], matrix)


def _rows(batch, rows):
    from dataclasses import replace
    return replace(batch, code_ids=batch.code_ids[rows], code_mask=batch.code_mask[rows],
                   code_ext=batch.code_ext[rows], sel_ext=batch.sel_ext[rows],
                   leaf_mask=batch.leaf_mask[rows])


def beam_search(checkpoint, snippet, k=None, copy_mode=None) -> list[SummaryHypothesis]:
    return Summarizer(checkpoint).beam_search(snippet, k, copy_mode)


def greedy(checkpoint, snippet, copy_mode=None) -> SummaryHypothesis:
    return Summarizer(checkpoint).greedy(snippet, copy_mode)


def attribution(checkpoint, snippet, summary=None) -> AttributionMatrix:
    return Summarizer(checkpoint).attribution(snippet, summary)
