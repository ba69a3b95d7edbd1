"""Independent edge oracle for the golden graph cases, plus the golden writer.

Run ``python tests/golden/oracle.py`` to regenerate the JSON files after a
deliberate change to the parsers or the edge rules.
"""
import json
import re
import sys
from collections import Counter
from pathlib import Path

from gypsum.frontend import SourceSnippet, Vocabulary, extend_ast, parse_source

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))
from cases import CASES  # noqa: E402

_STEP = re.compile(r"^(?P<name>\w+)(?:#(?P<k>\d+))?(?:\[(?P<i>-?\d+)\])?$")


def extended_ast(language, code):
    return extend_ast(parse_source(SourceSnippet(code, language)), Vocabulary([]), language)


def _preorder(ast):
    out = []

    def visit(n):
        out.append(n)
        for c in ast.kids(n):
            visit(c)
    visit(ast.root)
    return out


def resolve(ast, locator):
    exit_ = locator.startswith("exit:")
    steps = locator[5:].split("/") if exit_ else locator.split("/")
    m = _STEP.match(steps[0])
    hits = [n for n in _preorder(ast) if ast.node(n).kind == m["name"]]
    node = hits[int(m["k"] or 0)]
    for step in steps[1:]:
        m = _STEP.match(step)
        kids = [c for c in ast.kids(node) if ast.node(c).role == m["name"]]
        node = kids[int(m["i"] or 0)]
    if exit_:
        parent = next(p for p in _preorder(ast) if node in ast.kids(p))
        kids = ast.kids(parent)
        node = kids[kids.index(node) + 1]
    return node


def base_edges(ast):
    """Child / NextSibling / NextToken / NextUse by recursive descent."""
    edges, leaves, last = [], [], {}

    def visit(n):
        node = ast.node(n)
        if node.is_leaf:
            leaves.append(n)
        if node.ident:
            key = node.origin if node.origin is not None else node.text
            if key in last:
                edges.append((last[key], n, "NextUse"))
            last[key] = n
        kids = ast.kids(n)
        edges.extend((n, c, "Child") for c in kids)
        edges.extend((a, b, "NextSibling") for a, b in zip(kids, kids[1:]))
        for c in kids:
            visit(c)
    visit(ast.root)
    edges.extend((a, b, "NextToken") for a, b in zip(leaves, leaves[1:]))
    return edges


def expected_edges(name):
    """Full edge multiset in pre-order positions: forward, reversed and Self."""
    language, code, control = CASES[name]
    ast = extended_ast(language, code)
    forward = base_edges(ast) + [(resolve(ast, s), resolve(ast, d), "Control") for s, d in control]
    rows = {n: i for i, n in enumerate(_preorder(ast))}
    out = [(rows[s], rows[d], t) for s, d, t in forward]
    out += [(rows[d], rows[s], t + "_rev") for s, d, t in forward]
    out += [(i, i, "Self") for i in range(len(rows))]
    return ast, sorted(out)


def golden_record(name):
    language, code, _ = CASES[name]
    ast, edges = expected_edges(name)
    nodes = [[ast.node(n).kind, ast.node(n).text, ast.node(n).is_leaf] for n in _preorder(ast)]
    return {"name": name, "language": language, "code": code, "nodes": nodes,
            "edges": [list(e) for e in edges],
            "edge_counts": dict(sorted(Counter(t for _, _, t in edges).items()))}


def main():
    for name in CASES:
        path = HERE / f"{name}.json"
        path.write_text(json.dumps(golden_record(name), indent=1) + "\n")
        print("wrote", path.name)


if __name__ == "__main__":
    main()
