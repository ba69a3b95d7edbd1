"""Split loading and LCS-based train/test duplicate removal with histogram export."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import read_jsonl
from .errors import MissingFile
from .frontend import HeuristicTokenizer
from .kernels import best_match, lcs_length, pack

BINS = 20   # width 0.05 over [0, 1]; the last bin is closed on the right

SPLIT_RATIOS = {"java": (8, 1, 1), "python": (6, 2, 2)}


@dataclass(frozen=True)
class SimilarityRecord:
    test_id: str
    train_id: str | None
    score: float
    lcs: int = 0
    longest: int = 0

    @property
    def bin(self) -> int:
        if self.longest == 0:
            return BINS - 1 if self.score >= 1.0 else 0
        return min(BINS - 1, (BINS * self.lcs) // self.longest)


@dataclass
class Histogram:
    counts: list

    def rows(self):
        for b, c in enumerate(self.counts):
            yield round(b / BINS, 2), round((b + 1) / BINS, 2), c

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_low", "bin_high", "count"])
            w.writerows(self.rows())


def _units(x, unit: str):
    if unit == "char":
        return list(x) if isinstance(x, str) else list("".join(x))
    return x.split() if isinstance(x, str) else list(x)


def _encode(seqs, table):
    return [np.array([table.setdefault(t, len(table)) for t in s], dtype=np.int64) for s in seqs]


def lcs_similarity(a, b, unit: str = "token") -> float:
    """LCS length over the longer length; two empty inputs count as identical."""
    a, b = _units(a, unit), _units(b, unit)
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return lcs_length(*_encode([a, b], {})) / longest


def code_units(snippet, unit: str = "token", tokenizer=None):
    if unit == "char":
        return list(snippet.code)
    return (tokenizer or HeuristicTokenizer()).split(snippet.code)


def dedup_split(train, test, unit: str = "token", tokenizer=None):
    """For every test snippet find its most similar training snippet.

    Returns (test snippets whose best score is below 1.0, one record per
    test snippet, histogram of best scores).
    """
    table = {}
    train_seqs = _encode([code_units(s, unit, tokenizer) for s in train], table)
    pool, offsets = pack(train_seqs)
    cleaned, records = [], []
    counts = [0] * BINS
    for s in test:
        q = _encode([code_units(s, unit, tokenizer)], table)[0]
        idx, score = best_match(q, pool, offsets, 1.0) if train_seqs else (-1, 0.0)
        if idx >= 0:
            other = train_seqs[idx]
            longest = max(len(q), len(other))
            lcs = lcs_length(q, other) if longest else 0
            score = lcs / longest if longest else 1.0
            rec = SimilarityRecord(s.id, train[idx].id, score, lcs, longest)
        else:
            rec = SimilarityRecord(s.id, None, 0.0, 0, len(q))
        records.append(rec)
        counts[rec.bin] += 1
        if rec.score < 1.0:
            cleaned.append(s)
    return cleaned, records, Histogram(counts)


def load_splits(directory, language=None) -> dict:
    """Read ``train/valid/test.jsonl`` from a directory (missing valid is allowed)."""
    directory = Path(directory)
    out = {}
    for name in ("train", "valid", "test"):
        path = directory / f"{name}.jsonl"
        if path.exists():
            out[name] = read_jsonl(path, language)
        elif name != "valid":
            raise MissingFile(f"split file not found: {path}")
    return out


def split_corpus(snippets, ratios=(8, 1, 1), seed: int = 0) -> dict:
    """Shuffle once with ``seed`` and cut into train/valid/test by integer ratios."""
    order = np.random.default_rng(seed).permutation(len(snippets))
    total = sum(ratios)
    n_train = len(snippets) * ratios[0] // total
    n_valid = len(snippets) * ratios[1] // total
    items = [snippets[i] for i in order]
    return {"train": items[:n_train], "valid": items[n_train:n_train + n_valid],
            "test": items[n_train + n_valid:]}
