"""Ordered AST container used by the parser, the extension pass and the graph builder."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

SPLIT_NODE = "_SplitNode_"


@dataclass(frozen=True)
class AstNode:
    id: int
    kind: str
    text: str | None
    is_leaf: bool
    # identifier nodes take part in NextUse chains, keyed on ``origin`` (pre-split text)
    ident: bool = False
    origin: str | None = None
    # attribute/field of the parent this node hangs under, e.g. "condition", "body"
    role: str | None = None


@dataclass
class ExtendedAst:
    nodes: list[AstNode]
    children: dict[int, list[int]]
    root: int
    # Python only: attribute text the parser drops, as (child index, kind, text, ident)
    pending: dict[int, list[tuple[int, str, str, bool]]] = field(default_factory=dict)

    def __post_init__(self):
        self._by_id = {n.id: n for n in self.nodes}

    def __eq__(self, other):
        if not isinstance(other, ExtendedAst):
            return NotImplemented
        return (self.nodes == other.nodes and self.children == other.children
                and self.root == other.root and self.pending == other.pending)

    def node(self, nid: int) -> AstNode:
        return self._by_id[nid]

    def kids(self, nid: int) -> list[int]:
        return self.children.get(nid, [])

    def __len__(self):
        return len(self.nodes)

    def parents(self) -> dict[int, int]:
        return {c: p for p, cs in self.children.items() for c in cs}

    def preorder(self) -> list[int]:
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.kids(nid)))
        return out

    def leaves(self) -> list[int]:
        """Leaf ids in source order."""
        return [i for i in self.preorder() if self._by_id[i].is_leaf]

    def leaf_texts(self) -> list[str]:
        return [self._by_id[i].text for i in self.leaves()]

    def relabel(self, mapping: dict[int, int]) -> "ExtendedAst":
        nodes = [replace(n, id=mapping[n.id]) for n in self.nodes]
        children = {mapping[p]: [mapping[c] for c in cs] for p, cs in self.children.items()}
        pending = {mapping[k]: list(v) for k, v in self.pending.items()}
        return ExtendedAst(nodes, children, mapping[self.root], pending)

    def validate(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        if self.root not in self._by_id:
            raise ValueError("root is not a node")
        seen_parent = {}
        for p, cs in self.children.items():
            for c in cs:
                if c in seen_parent:
                    raise ValueError(f"node {c} has two parents")
                seen_parent[c] = p
        if self.root in seen_parent:
            raise ValueError("root has a parent")
        if set(seen_parent) | {self.root} != set(ids):
            raise ValueError("tree is not connected")
        for n in self.nodes:
            if n.is_leaf and (n.text is None or self.kids(n.id)):
                raise ValueError(f"leaf {n.id} must have text and no children")
            if n.kind == SPLIT_NODE:
                kids = self.kids(n.id)
                if len(kids) < 2 or not all(self._by_id[k].is_leaf for k in kids):
                    raise ValueError(f"split node {n.id} needs >=2 leaf children")


class TreeBuilder:
    """Accumulates nodes in pre-order; ids are assigned sequentially."""

    def __init__(self):
        self.nodes: list[AstNode] = []
        self.children: dict[int, list[int]] = {}
        self.pending: dict[int, list[tuple[int, str, str, bool]]] = {}

    def add(self, kind, text=None, is_leaf=False, parent=None, ident=False, origin=None,
            role=None) -> int:
        nid = len(self.nodes)
        self.nodes.append(AstNode(nid, kind, text, is_leaf, ident, origin, role))
        if parent is not None:
            self.children.setdefault(parent, []).append(nid)
        return nid

    def defer(self, nid, kind, text, ident):
        index = len(self.children.get(nid, []))
        self.pending.setdefault(nid, []).append((index, kind, text, ident))

    def build(self, root=0) -> ExtendedAst:
        return ExtendedAst(self.nodes, self.children, root, self.pending)
