"""Sentence-level BLEU-4, METEOR and ROUGE-L on a 0-100 scale; corpus score = mean.

Inputs are token lists (or whitespace-separated strings), compared case-insensitively.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from nltk.stem.porter import PorterStemmer

from .errors import DataError
from .kernels import lcs_length

BLEU_EPSILON = 0.1
METEOR_ALPHA, METEOR_BETA, METEOR_GAMMA = 0.9, 3.0, 0.5

_stemmer = PorterStemmer()


def _tokens(x) -> list[str]:
    if isinstance(x, str):
        x = x.split()
    return [t.lower() for t in x]


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hyp, ref, max_order: int = 4) -> float:
    """Smoothed sentence BLEU with brevity penalty.

    The order is capped at the hypothesis length (weights stay uniform), zero
    n-gram matches above unigrams count as ``BLEU_EPSILON``, and a hypothesis
    sharing no unigram with the reference scores 0.
    """
    hyp, ref = _tokens(hyp), _tokens(ref)
    if not hyp or not ref:
        return 0.0
    order = min(max_order, len(hyp))
    log_p = 0.0
    for n in range(1, order + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        match = sum(min(c, r[g]) for g, c in h.items())
        if match == 0 and n == 1:
            return 0.0
        log_p += math.log(max(match, BLEU_EPSILON) / max(1, sum(h.values()))) / order
    c, r = len(hyp), len(ref)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return min(100.0, 100.0 * bp * math.exp(log_p))


def _align(hyp, ref):
    """Exact then Porter-stem matching; returns sorted (hyp index, ref index) pairs.

    Within a stage each hypothesis token takes the free reference position that
    continues the previous alignment when possible, else the leftmost one.
    """
    pairs = {}
    used = set()
    for key in (lambda t: t, _stemmer.stem):
        hk = [key(t) for t in hyp]
        rk = [key(t) for t in ref]
        for i, k in enumerate(hk):
            if i in pairs:
                continue
            free = [j for j, kk in enumerate(rk) if kk == k and j not in used]
            if not free:
                continue
            prev = pairs.get(i - 1)
            j = prev + 1 if prev is not None and prev + 1 in free else free[0]
            pairs[i] = j
            used.add(j)
    return sorted(pairs.items())


def meteor(hyp, ref) -> float:
    """METEOR with exact + stem stages, alpha 0.9, beta 3, gamma 0.5.

    Fragmentation is (chunks - 1) / (matches - 1) so a single contiguous
    chunk carries no penalty and identical inputs score 100.
    """
    hyp, ref = _tokens(hyp), _tokens(ref)
    if not hyp or not ref:
        return 0.0
    pairs = _align(hyp, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    P, R = m / len(hyp), m / len(ref)
    fmean = P * R / (METEOR_ALPHA * P + (1 - METEOR_ALPHA) * R)
    chunks = 1 + sum(1 for (i0, j0), (i1, j1) in zip(pairs, pairs[1:])
                     if not (i1 == i0 + 1 and j1 == j0 + 1))
    frag = (chunks - 1) / max(m - 1, 1)
    penalty = METEOR_GAMMA * frag ** METEOR_BETA
    return max(0.0, min(100.0, 100.0 * fmean * (1 - penalty)))


def _intern(*seqs):
    table = {}
    return [np.array([table.setdefault(t, len(table)) for t in s], dtype=np.int64) for s in seqs]


def rouge_l(hyp, ref) -> float:
    """LCS-based F1 (beta = 1)."""
    hyp, ref = _tokens(hyp), _tokens(ref)
    if not hyp or not ref:
        return 0.0
    lcs = lcs_length(*_intern(hyp, ref))
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hyp), lcs / len(ref)
    return min(100.0, 100.0 * 2 * p * r / (p + r))


@dataclass
class MetricReport:
    bleu: float
    meteor: float
    rouge_l: float
    per_example: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"bleu": self.bleu, "meteor": self.meteor, "rouge_l": self.rouge_l,
                "count": len(self.per_example.get("bleu", [])), "per_example": self.per_example}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def evaluate_corpus(hyps, refs) -> MetricReport:
    hyps, refs = list(hyps), list(refs)
    if len(hyps) != len(refs):
        raise DataError(f"{len(hyps)} hypotheses but {len(refs)} references")
    per = {"bleu": [bleu(h, r) for h, r in zip(hyps, refs)],
           "meteor": [meteor(h, r) for h, r in zip(hyps, refs)],
           "rouge_l": [rouge_l(h, r) for h, r in zip(hyps, refs)]}
    mean = {k: (sum(v) / len(v) if v else 0.0) for k, v in per.items()}
    return MetricReport(mean["bleu"], mean["meteor"], mean["rouge_l"], per)
