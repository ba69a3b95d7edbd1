from __future__ import annotations

from .tokenizer import Tokenizer, Vocabulary
from .tree import SPLIT_NODE, ExtendedAst, TreeBuilder


def extend_ast(tree: ExtendedAst, vocab: Vocabulary | Tokenizer, language: str | None = None) -> ExtendedAst:
    """Insert dropped Python attributes as leaves, then split multi-sub-word leaves.

    A leaf whose text tokenizes into several sub-words becomes a ``_SplitNode_``
    whose children are the sub-word leaves; single sub-word leaves get their
    text normalized to that sub-word. Ids are renumbered in pre-order, which
    makes the pass idempotent.
    """
    split = vocab.split
    b = TreeBuilder()

    def add_leaf(kind, text, ident, origin, parent, role):
        pieces = split(text)
        if len(pieces) <= 1:
            b.add(kind, pieces[0] if pieces else text, True, parent, ident, origin, role)
            return
        holder = b.add(SPLIT_NODE, None, False, parent, ident, origin, role)
        for p in pieces:
            b.add(kind, p, True, holder, role="subword")

    def copy(nid, parent):
        n = tree.node(nid)
        if n.is_leaf:
            add_leaf(n.kind, n.text, n.ident, n.origin, parent, n.role)
            return
        new = b.add(n.kind, n.text, False, parent, n.ident, n.origin, n.role)
        extra = sorted(tree.pending.get(nid, []), key=lambda p: p[0])
        kids = tree.kids(nid)
        k = 0
        for i, child in enumerate(kids):
            while k < len(extra) and extra[k][0] <= i:
                _, kind, text, ident = extra[k]
                add_leaf(kind, text, ident, text if ident else None, new, kind)
                k += 1
            copy(child, new)
        for _, kind, text, ident in extra[k:]:
            add_leaf(kind, text, ident, text if ident else None, new, kind)

    copy(tree.root, None)
    return ExtendedAst(b.nodes, b.children, 0, {})
