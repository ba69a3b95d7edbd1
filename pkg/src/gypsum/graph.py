"""Semantic graph construction over extended ASTs.

Edges are (src, dst, EdgeType) triples kept in a list; parallel edges of
different types between the same pair are legal and are all used by the
graph encoder.
"""
from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .frontend.tree import AstNode, ExtendedAst

CONTROL_PATTERNS = ("if", "while", "for", "switch")


class EdgeType(enum.IntEnum):
    Child = 0
    NextSibling = 1
    NextUse = 2
    NextToken = 3
    Control = 4
    Child_rev = 5
    NextSibling_rev = 6
    NextUse_rev = 7
    NextToken_rev = 8
    Control_rev = 9
    Self = 10

    @property
    def is_reversed(self) -> bool:
        return self.name.endswith("_rev")

    @property
    def is_forward(self) -> bool:
        return not self.is_reversed and self is not EdgeType.Self

    def reversed(self) -> "EdgeType":
        if self is EdgeType.Self:
            raise ValueError("Self edges have no reversed variant")
        if self.is_reversed:
            return EdgeType[self.name[:-4]]
        return EdgeType[self.name + "_rev"]


Edge = tuple  # (src, dst, EdgeType)


@dataclass
class SemanticGraph:
    ast: ExtendedAst
    edges: list = field(default_factory=list)
    id: str = ""

    def __eq__(self, other):
        if not isinstance(other, SemanticGraph):
            return NotImplemented
        return self.id == other.id and self.ast == other.ast and self.edges == other.edges

    @property
    def num_nodes(self) -> int:
        return len(self.ast.nodes)

    def of_type(self, etype: EdgeType) -> list:
        return [(s, d) for s, d, t in self.edges if t == etype]

    def with_edges(self, edges) -> "SemanticGraph":
        return SemanticGraph(self.ast, list(edges), self.id)


# ---------------------------------------------------------------- base edges

def add_base_edges(ast: ExtendedAst, graph_id: str = "") -> SemanticGraph:
    """Child, NextSibling, NextToken and NextUse edges."""
    order = ast.preorder()
    edges = []
    for p in order:
        for c in ast.kids(p):
            edges.append((p, c, EdgeType.Child))
    for p in order:
        kids = ast.kids(p)
        for a, b in zip(kids, kids[1:]):
            edges.append((a, b, EdgeType.NextSibling))
    leaves = [n for n in order if ast.node(n).is_leaf]
    for a, b in zip(leaves, leaves[1:]):
        edges.append((a, b, EdgeType.NextToken))
    last_use: dict[str, int] = {}
    for n in order:
        node = ast.node(n)
        if not node.ident:
            continue
        key = node.origin if node.origin is not None else node.text
        if key in last_use:
            edges.append((last_use[key], n, EdgeType.NextUse))
        last_use[key] = n
    return SemanticGraph(ast, edges, graph_id)


# ---------------------------------------------------------------- control edges

def _by_role(ast, nid, role):
    return [c for c in ast.kids(nid) if ast.node(c).role == role]


def _one(ast, nid, role):
    found = _by_role(ast, nid, role)
    return found[0] if found else None


def _next_sibling(ast, parents, nid):
    parent = parents.get(nid)
    if parent is None:
        return None
    kids = ast.kids(parent)
    i = kids.index(nid)
    return kids[i + 1] if i + 1 < len(kids) else None


def _java_last_stmt(ast, body):
    if ast.node(body).kind == "BlockStatement":
        stmts = _by_role(ast, body, "statements")
        if stmts:
            return stmts[-1]
    return body


def _java_control(ast, nid, exit_, patterns):
    kind = ast.node(nid).kind
    out = []
    if kind == "IfStatement" and "if" in patterns:
        cond = _one(ast, nid, "condition")
        then = _one(ast, nid, "then_statement")
        other = _one(ast, nid, "else_statement")
        if cond is not None and then is not None:
            out.append((cond, then))
        if cond is not None and other is not None:
            out.append((cond, other))
        if then is not None and exit_ is not None:
            out.append((then, exit_))
    elif kind == "WhileStatement" and "while" in patterns:
        cond, body = _one(ast, nid, "condition"), _one(ast, nid, "body")
        out += _loop(cond, body, _java_last_stmt(ast, body) if body is not None else None, exit_)
    elif kind == "ForStatement" and "for" in patterns:
        control, body = _one(ast, nid, "control"), _one(ast, nid, "body")
        last = _java_last_stmt(ast, body) if body is not None else None
        if control is None:
            return out
        if ast.node(control).kind == "EnhancedForControl":
            out += _loop(_one(ast, control, "iterable"), body, last, exit_)
        else:
            init = _by_role(ast, control, "init")
            cond = _one(ast, control, "condition")
            update = _by_role(ast, control, "update")
            out += _for(init, cond, body, last, update, exit_)
    elif kind == "SwitchStatement" and "switch" in patterns:
        sel = _one(ast, nid, "expression")
        for case in _by_role(ast, nid, "cases"):
            if sel is not None:
                out.append((sel, case))
            if exit_ is not None:
                out.append((case, exit_))
    return out


def _loop(cond, body, last, exit_):
    """while-shaped: cond->body, last body statement->cond, cond->exit."""
    out = []
    if cond is None:
        return out
    if body is not None:
        out.append((cond, body))
        out.append((last, cond))
    if exit_ is not None:
        out.append((cond, exit_))
    return out


def _for(init, cond, body, last, update, exit_):
    out = []
    if init and cond is not None:
        out.append((init[-1], cond))
    if cond is not None and body is not None:
        out.append((cond, body))
    if update:
        if last is not None:
            out.append((last, update[0]))
        out += list(zip(update, update[1:]))
        if cond is not None:
            out.append((update[-1], cond))
    elif last is not None and cond is not None:
        out.append((last, cond))
    if cond is not None and exit_ is not None:
        out.append((cond, exit_))
    return out


def _python_control(ast, nid, exit_, patterns):
    kind = ast.node(nid).kind
    out = []
    if kind == "If" and "if" in patterns:
        test, body, orelse = _one(ast, nid, "test"), _by_role(ast, nid, "body"), _by_role(ast, nid, "orelse")
        if test is not None and body:
            out.append((test, body[0]))
        if test is not None and orelse:
            out.append((test, orelse[0]))
        if body and exit_ is not None:
            out.append((body[-1], exit_))
    elif kind == "While" and "while" in patterns:
        body = _by_role(ast, nid, "body")
        out += _loop(_one(ast, nid, "test"), body[0] if body else None, body[-1] if body else None, exit_)
    elif kind in ("For", "AsyncFor") and "for" in patterns:
        # iter plays init, the loop target plays the per-iteration condition/update
        it, target, body = _one(ast, nid, "iter"), _one(ast, nid, "target"), _by_role(ast, nid, "body")
        out += _for([it] if it is not None else [], target, body[0] if body else None,
                    body[-1] if body else None, [], exit_)
    elif kind == "Match" and "switch" in patterns:
        subject = _one(ast, nid, "subject")
        for case in _by_role(ast, nid, "cases"):
            if subject is not None:
                out.append((subject, case))
            if exit_ is not None:
                out.append((case, exit_))
    return out


def add_control_edges(g: SemanticGraph, patterns=CONTROL_PATTERNS) -> SemanticGraph:
    """Control-flow edges inside if/while/for/switch subtrees (plus one exit edge)."""
    ast = g.ast
    parents = ast.parents()
    edges = [e for e in g.edges if e[2] != EdgeType.Control]
    for nid in ast.preorder():
        node = ast.node(nid)
        if node.is_leaf:
            continue
        exit_ = _next_sibling(ast, parents, nid)
        pairs = _java_control(ast, nid, exit_, patterns) + _python_control(ast, nid, exit_, patterns)
        edges += [(s, d, EdgeType.Control) for s, d in pairs]
    return g.with_edges(edges)


def add_reverse_and_self_edges(g: SemanticGraph) -> SemanticGraph:
    forward = [e for e in g.edges if e[2].is_forward]
    rev = [(d, s, t.reversed()) for s, d, t in forward]
    loops = [(n, n, EdgeType.Self) for n in g.ast.preorder()]
    return g.with_edges(forward + rev + loops)


# ---------------------------------------------------------------- ordering

@dataclass(frozen=True)
class NodeOrdering:
    selected: list
    mask: np.ndarray  # bool, length l_g

    def __len__(self):
        return len(self.selected)


def order_nodes(g: SemanticGraph, l_g: int) -> NodeOrdering:
    """Leaves in source order, then internal nodes in pre-order, truncated to ``l_g``."""
    if l_g < 1:
        raise ValueError("l_g must be >= 1")
    pre = g.ast.preorder()
    leaves = [n for n in pre if g.ast.node(n).is_leaf]
    inner = [n for n in pre if not g.ast.node(n).is_leaf]
    selected = (leaves + inner)[:l_g]
    mask = np.zeros(l_g, dtype=bool)
    mask[: len(selected)] = True
    return NodeOrdering(selected, mask)


# ---------------------------------------------------------------- build + io

def build_graph(ast: ExtendedAst, graph_id: str = "", patterns=CONTROL_PATTERNS) -> SemanticGraph:
    g = add_base_edges(ast, graph_id)
    g = add_control_edges(g, patterns)
    return add_reverse_and_self_edges(g)


def _node_record(n: AstNode) -> dict:
    rec = {"id": n.id, "kind": n.kind, "text": n.text, "leaf": n.is_leaf}
    # optional extras, omitted at their defaults
    if n.ident:
        rec["ident"] = True
    if n.origin is not None:
        rec["origin"] = n.origin
    if n.role is not None:
        rec["role"] = n.role
    return rec


def serialize_graph(g: SemanticGraph) -> bytes:
    rec = {
        "id": g.id,
        "nodes": [_node_record(n) for n in g.ast.nodes],
        "edges": [{"s": s, "d": d, "t": t.name} for s, d, t in g.edges],
    }
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def deserialize_graph(data: bytes | str) -> SemanticGraph:
    try:
        rec = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"malformed graph record: {exc}") from None
    if not isinstance(rec, dict) or not {"nodes", "edges"} <= rec.keys():
        raise FormatError("graph record needs 'nodes' and 'edges'")
    try:
        nodes = [AstNode(int(r["id"]), str(r["kind"]), r["text"], bool(r["leaf"]),
                         bool(r.get("ident", False)), r.get("origin"), r.get("role"))
                 for r in rec["nodes"]]
        edges = [(int(e["s"]), int(e["d"]), EdgeType[e["t"]]) for e in rec["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed node or edge entry: {exc!r}") from None
    if not nodes:
        raise FormatError("graph has no nodes")
    ids = {n.id for n in nodes}
    if len(ids) != len(nodes):
        raise FormatError("duplicate node ids")
    children = defaultdict(list)
    for s, d, t in edges:
        if s not in ids or d not in ids:
            raise FormatError(f"edge ({s}, {d}) references an unknown node")
        if t == EdgeType.Child:
            children[s].append(d)
    has_parent = {c for cs in children.values() for c in cs}
    roots = [n.id for n in nodes if n.id not in has_parent]
    if len(roots) != 1:
        raise FormatError(f"expected exactly one root, found {len(roots)}")
    ast = ExtendedAst(nodes, dict(children), roots[0])
    try:
        ast.validate()
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    return SemanticGraph(ast, edges, str(rec.get("id", "")))


def write_graphs(path, graphs) -> None:
    with open(path, "wb") as fh:
        for g in graphs:
            fh.write(serialize_graph(g) + b"\n")


def read_graphs(path) -> list[SemanticGraph]:
    with open(path, "rb") as fh:
        lines = [ln for ln in fh.read().split(b"\n") if ln.strip()]
    if not lines:
        raise FormatError(f"{path} contains no graphs")
    return [deserialize_graph(ln) for ln in lines]
