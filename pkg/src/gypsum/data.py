"""Dataset records, per-snippet feature preparation and batch collation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .errors import DataError, FormatError, GypsumError, MissingFile, UnknownKind
from .frontend import (BOS, EOS, PAD, UNK, SourceSnippet, Vocabulary, extend_ast, parse_source,
                       strip_comments, tokenize)
from .graph import SemanticGraph, build_graph, order_nodes
from .model.gencoder import GraphBatch


def read_jsonl(path, default_language=None) -> list[SourceSnippet]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"dataset not found: {path}")
    out = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(SourceSnippet(rec["code"], rec.get("language") or default_language,
                                     rec.get("summary"), str(rec.get("id", lineno))))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"{path}:{lineno}: bad record ({exc})") from None
    return out


def write_jsonl(path, snippets) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in snippets:
            fh.write(json.dumps({"id": s.id, "code": s.code, "language": s.language,
                                 "summary": s.summary}, ensure_ascii=False) + "\n")


class KindVocab:
    """Node-kind ids for the type embedding; grows only when asked to."""

    def __init__(self, kinds=(), capacity=512):
        self.capacity = capacity
        self.kinds = list(kinds)
        self._index = {k: i for i, k in enumerate(self.kinds)}

    def lookup(self, kind: str, grow: bool = False) -> int:
        idx = self._index.get(kind)
        if idx is not None:
            return idx
        if not grow:
            raise UnknownKind(f"node kind {kind!r} has no type embedding")
        if len(self.kinds) >= self.capacity:
            raise UnknownKind(f"kind table is full ({self.capacity}); cannot add {kind!r}")
        self._index[kind] = len(self.kinds)
        self.kinds.append(kind)
        return self._index[kind]

    def __len__(self):
        return len(self.kinds)


@dataclass
class Example:
    id: str
    code_tokens: list
    code_ids: list
    graph: SemanticGraph
    rows: dict            # node id -> row in the node table (pre-order position)
    selected: list        # node ids in encoder output order
    node_kind: np.ndarray
    node_tok: np.ndarray
    node_leaf: np.ndarray
    edges: np.ndarray     # (3, E): src row, dst row, type
    oov: list             # source tokens outside the vocabulary, in first-seen order
    code_ext: list
    sel_ext: list
    sel_leaf: list
    summary_tokens: list | None = None
    targets: list | None = None   # extended ids of y_1..y_T, EOS-terminated

    def token(self, ext_id: int, vocab: Vocabulary) -> str:
        return vocab.token(ext_id) if ext_id < len(vocab) else self.oov[ext_id - len(vocab)]

    @property
    def leaf_ids(self) -> list:
        return self.graph.ast.leaves()


def code_tokens_of(snippet: SourceSnippet, vocab: Vocabulary, l_c: int):
    return tokenize(strip_comments(snippet.code, snippet.language), vocab, l_c)


def snippet_graph(snippet: SourceSnippet, vocab: Vocabulary, cfg) -> SemanticGraph:
    ast = extend_ast(parse_source(snippet), vocab, snippet.language)
    if len(ast) > cfg.max_nodes:
        raise DataError(f"{snippet.id}: graph has {len(ast)} nodes (cap {cfg.max_nodes})")
    return build_graph(ast, snippet.id, cfg.patterns)


def prepare_example(snippet: SourceSnippet, vocab: Vocabulary, kinds: KindVocab, cfg,
                    grow_kinds: bool = False, graph: SemanticGraph | None = None) -> Example:
    seq = code_tokens_of(snippet, vocab, cfg.l_c)
    g = graph if graph is not None else snippet_graph(snippet, vocab, cfg)
    ast = g.ast
    pre = ast.preorder()
    rows = {nid: r for r, nid in enumerate(pre)}
    nodes = [ast.node(n) for n in pre]
    node_kind = np.array([kinds.lookup(n.kind, grow_kinds) for n in nodes], dtype=np.int64)
    node_tok = np.array([vocab.id(n.text) if n.is_leaf else PAD for n in nodes], dtype=np.int64)
    node_leaf = np.array([n.is_leaf for n in nodes], dtype=bool)
    edges = np.array([[rows[s] for s, _, _ in g.edges], [rows[d] for _, d, _ in g.edges],
                      [int(t) for _, _, t in g.edges]], dtype=np.int64).reshape(3, -1)
    selected = order_nodes(g, cfg.l_g).selected
    if not any(ast.node(n).is_leaf for n in selected):
        raise DataError(f"{snippet.id}: graph has no leaf nodes")

    V = len(vocab)
    oov: list[str] = []
    oov_index: dict[str, int] = {}

    def ext(tok):
        if tok in vocab:
            return vocab.id(tok)
        if tok not in oov_index:
            oov_index[tok] = len(oov)
            oov.append(tok)
        return V + oov_index[tok]

    code_ext = [ext(t) for t in seq.tokens]
    sel_leaf = [ast.node(n).is_leaf for n in selected]
    sel_ext = [ext(ast.node(n).text) if leaf else PAD for n, leaf in zip(selected, sel_leaf)]

    summary_tokens = targets = None
    if snippet.summary is not None:
        summary_tokens = vocab.split(snippet.summary)[: cfg.l_s - 1]
        targets = [vocab.id(t) if t in vocab else (V + oov_index[t] if t in oov_index else UNK)
                   for t in summary_tokens] + [EOS]
    return Example(snippet.id, seq.tokens, seq.ids, g, rows, selected, node_kind, node_tok,
                   node_leaf, edges, oov, code_ext, sel_ext, sel_leaf, summary_tokens, targets)


def prepare_corpus(snippets, vocab, kinds, cfg, grow_kinds=False, graphs=None):
    """Prepare every snippet; returns (examples, skipped [(id, reason)]).

    ``graphs`` optionally maps snippet id to a prebuilt graph.
    """
    examples, skipped = [], []
    graphs = graphs or {}
    for s in snippets:
        try:
            examples.append(prepare_example(s, vocab, kinds, cfg, grow_kinds, graphs.get(s.id)))
        except (GypsumError, RecursionError) as exc:
            if isinstance(exc, UnknownKind) and not grow_kinds:
                raise
            skipped.append((s.id, str(exc)))
    return examples, skipped


def build_vocab(snippets, cfg, tokenizer=None) -> Vocabulary:
    probe = Vocabulary([], tokenizer)
    lists = []
    for s in snippets:
        lists.append(probe.split(strip_comments(s.code, s.language)))
        if s.summary:
            lists.append(probe.split(s.summary))
    return Vocabulary.build(lists, cfg.vocab_min_count, cfg.vocab_max_size, tokenizer)


@dataclass
class Batch:
    code_ids: torch.Tensor
    code_mask: torch.Tensor
    code_ext: torch.Tensor
    graph: GraphBatch
    sel_ext: torch.Tensor
    leaf_mask: torch.Tensor
    n_ext: int
    dec_in: torch.Tensor | None = None
    targets: torch.Tensor | None = None
    tgt_mask: torch.Tensor | None = None

    @property
    def size(self) -> int:
        return self.code_ids.shape[0]


def decoder_inputs(targets, V):
    """BOS-prefixed, right-shifted targets with extended (copied) ids mapped to UNK."""
    ids = [BOS] + list(targets[:-1])
    return [UNK if t >= V else t for t in ids]


def collate(examples: list[Example], cfg, vocab_size: int) -> Batch:
    B = len(examples)
    code_ids = torch.full((B, cfg.l_c), PAD, dtype=torch.long)
    code_ext = torch.full((B, cfg.l_c), PAD, dtype=torch.long)
    code_mask = torch.zeros(B, cfg.l_c, dtype=torch.bool)
    sel_index = torch.zeros(B, cfg.l_g, dtype=torch.long)
    sel_mask = torch.zeros(B, cfg.l_g, dtype=torch.bool)
    sel_ext = torch.full((B, cfg.l_g), PAD, dtype=torch.long)
    leaf_mask = torch.zeros(B, cfg.l_g, dtype=torch.bool)
    kinds, toks, leaves, srcs, dsts, types = [], [], [], [], [], []
    offset = 0
    for b, ex in enumerate(examples):
        n = len(ex.code_ids)
        code_ids[b, :n] = torch.as_tensor(ex.code_ids, dtype=torch.long)
        code_ext[b, :n] = torch.as_tensor(ex.code_ext, dtype=torch.long)
        code_mask[b, :n] = True
        m = len(ex.selected)
        sel_index[b, :m] = torch.as_tensor([ex.rows[s] + offset for s in ex.selected])
        sel_mask[b, :m] = True
        sel_ext[b, :m] = torch.as_tensor(ex.sel_ext, dtype=torch.long)
        leaf_mask[b, :m] = torch.as_tensor(ex.sel_leaf, dtype=torch.bool)
        kinds.append(ex.node_kind)
        toks.append(ex.node_tok)
        leaves.append(ex.node_leaf)
        srcs.append(ex.edges[0] + offset)
        dsts.append(ex.edges[1] + offset)
        types.append(ex.edges[2])
        offset += len(ex.node_kind)
    graph = GraphBatch(
        torch.from_numpy(np.concatenate(kinds)), torch.from_numpy(np.concatenate(toks)),
        torch.from_numpy(np.concatenate(leaves)), torch.from_numpy(np.concatenate(srcs)),
        torch.from_numpy(np.concatenate(dsts)), torch.from_numpy(np.concatenate(types)),
        sel_index, sel_mask)
    n_ext = max(len(ex.oov) for ex in examples)
    batch = Batch(code_ids, code_mask, code_ext, graph, sel_ext, leaf_mask, n_ext)
    if all(ex.targets is not None for ex in examples):
        T = max(len(ex.targets) for ex in examples)
        dec_in = torch.full((B, T), PAD, dtype=torch.long)
        targets = torch.full((B, T), PAD, dtype=torch.long)
        for b, ex in enumerate(examples):
            t = len(ex.targets)
            targets[b, :t] = torch.as_tensor(ex.targets, dtype=torch.long)
            dec_in[b, :t] = torch.as_tensor(decoder_inputs(ex.targets, vocab_size), dtype=torch.long)
        batch.dec_in, batch.targets, batch.tgt_mask = dec_in, targets, targets != PAD
    return batch
