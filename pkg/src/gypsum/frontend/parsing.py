"""Java (javalang) and Python (stdlib ast) front ends producing raw ordered ASTs."""
from __future__ import annotations

import ast as pyast
import io
import keyword
import re
import tokenize as pytokenize
from dataclasses import dataclass

import javalang

from ..errors import ParseError
from .tree import ExtendedAst, TreeBuilder

LANGUAGES = ("java", "python")


@dataclass(frozen=True)
class SourceSnippet:
    code: str
    language: str
    summary: str | None = None
    id: str = ""

    def __post_init__(self):
        if not self.code or not self.code.strip():
            raise ValueError("snippet code is empty")
        if self.language not in LANGUAGES:
            raise ValueError(f"unsupported language {self.language!r}")


# ---------------------------------------------------------------- comments

_JAVA_LEX = re.compile(
    r'"(?:\\.|[^"\\\n])*"|\'(?:\\.|[^\'\\\n])*\'|//[^\n]*|/\*.*?\*/', re.DOTALL)


def _strip_java_comments(code: str) -> str:
    def repl(m):
        s = m.group()
        if s.startswith("//"):
            return ""
        if s.startswith("/*"):
            return " " + "\n" * s.count("\n")
        return s
    return _JAVA_LEX.sub(repl, code)


def _strip_python_comments(code: str) -> str:
    lines = code.splitlines(keepends=True)
    try:
        toks = list(pytokenize.generate_tokens(io.StringIO(code).readline))
    except (pytokenize.TokenError, IndentationError, SyntaxError):
        return code
    # blank right-to-left so earlier columns stay valid
    for tok in reversed(toks):
        if tok.type == pytokenize.COMMENT:
            (row, col), (_, end) = tok.start, tok.end
            line = lines[row - 1]
            lines[row - 1] = line[:col].rstrip() + line[end:]
    return "".join(lines)


def strip_comments(code: str, language: str) -> str:
    if language == "java":
        return _strip_java_comments(code)
    return _strip_python_comments(code)


# ---------------------------------------------------------------- Java

JAVA_KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do double
else enum extends final finally float for goto if implements import instanceof int interface
long native new package private protected public return short static strictfp super switch
synchronized this throw throws transient try void volatile while true false null var
""".split())
_JAVA_IDENT_ATTRS = frozenset({"name", "member", "qualifier"})
_MODIFIER_ORDER = ("public", "protected", "private", "abstract", "static", "final", "transient",
                   "volatile", "synchronized", "native", "strictfp", "default")
_WRAP = "class _GypsumWrap_ {\n"


def _java_attr_order(node) -> list[str]:
    attrs = [a for a in node.attrs if a != "documentation"]
    if "annotations" in attrs and "modifiers" in attrs:
        attrs.remove("annotations")
        attrs.insert(attrs.index("modifiers"), "annotations")
    name = type(node).__name__
    if name == "BinaryOperation":
        return ["operandl", "operator", "operandr"]
    if name == "Assignment":
        return ["expressionl", "type", "value"]
    if isinstance(node, javalang.tree.Primary):
        head = ["prefix_operators", "qualifier"]
        tail = ["selectors", "postfix_operators"]
        own = [a for a in attrs if a not in head and a not in tail]
        if "member" in own:
            own.remove("member")
            own.insert(own.index("arguments") if "arguments" in own else len(own), "member")
        return head + own + tail
    return attrs


def _is_java_ident(text: str) -> bool:
    return text.isidentifier() and text not in JAVA_KEYWORDS


def _java_tree(root) -> ExtendedAst:
    b = TreeBuilder()

    def visit(node, parent, role=None):
        nid = b.add(type(node).__name__, parent=parent, role=role)
        for attr in _java_attr_order(node):
            value = getattr(node, attr, None)
            emit(attr, value, nid)
        return nid

    def leaf(attr, text, parent):
        ident = attr in _JAVA_IDENT_ATTRS and _is_java_ident(text)
        b.add(attr, text, True, parent, ident=ident, origin=text if ident else None, role=attr)

    def emit(attr, value, parent):
        if value is None or isinstance(value, bool):
            return
        if isinstance(value, javalang.ast.Node):
            visit(value, parent, attr)
        elif isinstance(value, str):
            if value:
                leaf(attr, value, parent)
        elif isinstance(value, (set, frozenset)):
            strs = [v for v in value if isinstance(v, str)]
            rank = {m: i for i, m in enumerate(_MODIFIER_ORDER)}
            for v in sorted(strs, key=lambda m: (rank.get(m, len(rank)), m)):
                leaf(attr, v, parent)
            for v in value:
                if isinstance(v, javalang.ast.Node):
                    visit(v, parent, attr)
        elif isinstance(value, (list, tuple)):
            for v in value:
                emit(attr, v, parent)

    visit(root, None)
    return b.build()


def _java_error(exc, line_offset=0) -> ParseError:
    pos = getattr(getattr(exc, "at", None), "position", None)
    if pos is None:
        pos = getattr(exc, "position", None)
    line = col = None
    if pos is not None:
        line, col = pos[0] - line_offset, pos[1]
    desc = getattr(exc, "description", None) or str(exc) or type(exc).__name__
    return ParseError(f"Java syntax error: {desc}", line, col)


_JAVA_ERRORS = (javalang.parser.JavaSyntaxError, javalang.tokenizer.LexerError,
                StopIteration, IndexError, TypeError, AttributeError)


def parse_java(code: str) -> ExtendedAst:
    """Parse a Java method/member (or whole compilation unit) into a raw AST."""
    try:
        unit = javalang.parse.parse(_WRAP + code + "\n}")
        members = unit.types[0].body
        if len(members) == 1:
            return _java_tree(members[0])
        tree = _java_tree(unit.types[0])
        # drop the synthetic wrapper by re-rooting onto a bare member list
        return _reroot_members(tree)
    except _JAVA_ERRORS as exc:
        first = exc
    try:
        unit = javalang.parse.parse(code)
    except _JAVA_ERRORS:
        raise _java_error(first, line_offset=1) from None
    return _java_tree(unit)


def _reroot_members(tree: ExtendedAst) -> ExtendedAst:
    b = TreeBuilder()
    root = b.add("ClassBody")

    def copy(nid, parent):
        n = tree.node(nid)
        new = b.add(n.kind, n.text, n.is_leaf, parent, n.ident, n.origin, n.role)
        for c in tree.kids(nid):
            copy(c, new)

    for c in tree.kids(tree.root):
        if not tree.node(c).is_leaf:
            copy(c, root)
    return b.build(root)


# ---------------------------------------------------------------- Python

_OP_TEXT = {
    "Add": "+", "Sub": "-", "Mult": "*", "MatMult": "@", "Div": "/", "Mod": "%", "Pow": "**",
    "LShift": "<<", "RShift": ">>", "BitOr": "|", "BitXor": "^", "BitAnd": "&", "FloorDiv": "//",
    "And": "and", "Or": "or", "Invert": "~", "Not": "not", "UAdd": "+", "USub": "-",
    "Eq": "==", "NotEq": "!=", "Lt": "<", "LtE": "<=", "Gt": ">", "GtE": ">=", "Is": "is",
    "IsNot": "is not", "In": "in", "NotIn": "not in",
}
_KEYWORD_STMTS = {"Pass": "pass", "Break": "break", "Continue": "continue"}
_PY_IDENT_FIELDS = frozenset({"name", "arg", "attr", "asname", "names"})
_SKIP_FIELDS = frozenset({"ctx", "type_comment", "kind", "level", "conversion", "is_async",
                          "simple"})


def _pos(node):
    return (getattr(node, "lineno", 1 << 30), getattr(node, "col_offset", 1 << 30))


def _py_fields(node) -> list[tuple[str, object]]:
    """(field, value) pairs in source order."""
    name = type(node).__name__
    f = dict(pyast.iter_fields(node))
    if name in ("FunctionDef", "AsyncFunctionDef"):
        order = ["decorator_list", "name", "args", "returns", "body"]
    elif name == "ClassDef":
        order = ["decorator_list", "name", "bases", "keywords", "body"]
    elif name == "IfExp":
        order = ["body", "test", "orelse"]
    elif name == "Compare":
        out = [("left", node.left)]
        for op, comp in zip(node.ops, node.comparators):
            out += [("ops", op), ("comparators", comp)]
        return out
    elif name == "Dict":
        out = []
        for k, v in zip(node.keys, node.values):
            out += [("keys", k), ("values", v)]
        return out
    elif name == "BoolOp":
        return [("values", node.values[0]), ("op", node.op)] + [("values", v) for v in node.values[1:]]
    elif name == "Call":
        rest = sorted([("args", a) for a in node.args] + [("keywords", k) for k in node.keywords],
                      key=lambda p: _pos(p[1]))
        return [("func", node.func)] + rest
    elif name == "arguments":
        items = []
        for fld in ("posonlyargs", "args", "vararg", "kwonlyargs", "kwarg", "defaults",
                    "kw_defaults"):
            v = f.get(fld)
            for x in (v if isinstance(v, list) else [v]):
                if x is not None:
                    items.append((fld, x))
        return sorted(items, key=lambda p: _pos(p[1]))
    else:
        order = list(f)
    return [(k, f.get(k)) for k in order]


def _python_tree(node: pyast.AST, code: str) -> ExtendedAst:
    b = TreeBuilder()

    def visit(n, parent, role=None):
        name = type(n).__name__
        if isinstance(n, pyast.Name):
            b.add(name, n.id, True, parent, ident=True, origin=n.id, role=role)
            return
        if isinstance(n, (pyast.Constant, pyast.JoinedStr)):
            text = pyast.get_source_segment(code, n) or repr(getattr(n, "value", ""))
            b.add(name, text, True, parent, role=role)
            return
        if name in _OP_TEXT:
            b.add(name, _OP_TEXT[name], True, parent, role=role)
            return
        if name in _KEYWORD_STMTS:
            b.add(name, _KEYWORD_STMTS[name], True, parent, role=role)
            return
        nid = b.add(name, parent=parent, role=role)
        for fld, value in _py_fields(n):
            if fld in _SKIP_FIELDS or value is None:
                continue
            vals = value if isinstance(value, list) else [value]
            for v in vals:
                if isinstance(v, pyast.AST):
                    visit(v, nid, fld)
                elif isinstance(v, str):
                    # the parser keeps these only as node attributes
                    ident = fld in _PY_IDENT_FIELDS and v.isidentifier() and not keyword.iskeyword(v)
                    b.defer(nid, fld, v, ident)

    visit(node, None)
    return b.build()


def parse_python(code: str) -> ExtendedAst:
    try:
        module = pyast.parse(code)
    except SyntaxError as exc:
        raise ParseError(f"Python syntax error: {exc.msg}", exc.lineno, exc.offset) from None
    if not module.body:
        raise ParseError("Python snippet has no statements", 1, 0)
    root = module.body[0] if len(module.body) == 1 else module
    return _python_tree(root, code)


def parse_source(snippet: SourceSnippet) -> ExtendedAst:
    """Comment-stripped parse of ``snippet`` into a raw (pre-extension) AST."""
    code = strip_comments(snippet.code, snippet.language)
    if snippet.language == "java":
        return parse_java(code)
    return parse_python(code)
