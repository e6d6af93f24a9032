"""Java syntax trees for JUnit test sources.

Wraps the tree-sitter Java grammar into immutable :class:`AstNode` trees and
layers the test-specific analyses on top: test-method discovery, read/write
variable sets per statement, and comment-aware token streams.
"""

from __future__ import annotations

import functools
import logging
import re
import threading
from dataclasses import dataclass, field
from importlib import metadata
from typing import Iterable, Iterator, Sequence

import tree_sitter_java
from tree_sitter import Language, Parser

logger = logging.getLogger(__name__)

JAVA_LANGUAGE = Language(tree_sitter_java.language())

try:
    GRAMMAR_VERSION = f"tree-sitter-java {metadata.version('tree-sitter-java')}"
except metadata.PackageNotFoundError:  # pragma: no cover - vendored grammar
    GRAMMAR_VERSION = "tree-sitter-java (unknown)"

DEFAULT_MODIFICATION_KEYWORDS: tuple[str, ...] = (
    "set", "add", "insert", "remove", "put", "push", "append",
    "clear", "delete", "write", "update", "register",
)

TEST_ANNOTATIONS = frozenset({"Test", "ParameterizedTest"})

COMMENT_KINDS = frozenset({"line_comment", "block_comment"})
# String-like literals are single lexical tokens even though the grammar
# gives them fragment children.
ATOMIC_TOKEN_KINDS = frozenset({"string_literal", "character_literal"})

NORMAL_STATEMENT_KINDS = frozenset({
    "local_variable_declaration", "expression_statement", "return_statement",
    "throw_statement", "assert_statement", "break_statement",
    "continue_statement", "yield_statement",
})
CONTROL_STATEMENT_KINDS = frozenset({
    "if_statement", "for_statement", "enhanced_for_statement", "while_statement",
    "do_statement", "try_statement", "try_with_resources_statement",
    "switch_expression", "switch_statement", "synchronized_statement",
    "labeled_statement", "block",
})
STATEMENT_KINDS = NORMAL_STATEMENT_KINDS | CONTROL_STATEMENT_KINDS

JAVA_KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default
do double else enum extends final finally float for goto if implements import
instanceof int interface long native new package private protected public return
short static strictfp super switch synchronized this throw throws transient try
void volatile while var record yield sealed permits true false null
""".split())

_IDENTIFIER_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*\Z")


class UnreadableInput(ValueError):
    """Source bytes are not valid UTF-8."""


class FatalParse(RuntimeError):
    """The parser produced no tree at all."""


class UnsupportedStatement(ValueError):
    """A node kind outside the statement grammar reached the rw analysis."""


@dataclass(frozen=True, eq=False)
class AstNode:
    kind: str
    start: int
    end: int
    children: tuple["AstNode", ...]
    source: bytes = field(repr=False)
    field_name: str | None = None
    named: bool = True
    missing: bool = False

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def text(self) -> str:
        return self.source[self.start:self.end].decode("utf-8")

    @property
    def named_children(self) -> tuple["AstNode", ...]:
        return tuple(c for c in self.children if c.named)

    @property
    def is_comment(self) -> bool:
        return self.kind in COMMENT_KINDS

    @property
    def is_error(self) -> bool:
        return self.kind == "ERROR" or self.missing

    def child(self, field_name: str) -> "AstNode | None":
        for c in self.children:
            if c.field_name == field_name:
                return c
        return None

    def children_by_field(self, field_name: str) -> list["AstNode"]:
        return [c for c in self.children if c.field_name == field_name]

    def walk(self) -> Iterator["AstNode"]:
        """Pre-order traversal including this node."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def has_error(self) -> bool:
        return any(n.is_error for n in self.walk())

    def __repr__(self) -> str:
        return f"AstNode({self.kind!r}, {self.start}..{self.end})"


@dataclass(frozen=True)
class SyntaxTree:
    source_text: str
    root: AstNode
    parse_errors: tuple[tuple[tuple[int, int], str], ...] = ()

    @property
    def source_bytes(self) -> bytes:
        return self.root.source


@dataclass(frozen=True)
class TestMethod:
    name: str
    class_name: str
    annotations: tuple[str, ...]
    body: tuple[AstNode, ...]
    declaration_node: AstNode
    parse_error: str | None = None

    __test__ = False  # keep pytest from collecting this class

    @property
    def block(self) -> AstNode:
        block = self.declaration_node.child("body")
        assert block is not None
        return block

    @property
    def name_node(self) -> AstNode:
        node = self.declaration_node.child("name")
        assert node is not None
        return node


@dataclass(frozen=True)
class Token:
    kind: str
    text: str

    @property
    def is_comment(self) -> bool:
        return self.kind in COMMENT_KINDS

    @property
    def is_identifier(self) -> bool:
        return self.kind == "identifier"


# -- parsing -----------------------------------------------------------------

_local = threading.local()


def _parser() -> Parser:
    # tree-sitter parsers are not thread-safe; one per thread.
    parser = getattr(_local, "parser", None)
    if parser is None:
        parser = _local.parser = Parser(JAVA_LANGUAGE)
    return parser


def _convert(ts_node, source: bytes, field_name: str | None) -> AstNode:
    children = []
    if ts_node.type not in ATOMIC_TOKEN_KINDS:
        cursor = ts_node.walk()
        if cursor.goto_first_child():
            while True:
                children.append(_convert(cursor.node, source, cursor.field_name))
                if not cursor.goto_next_sibling():
                    break
    return AstNode(
        kind=ts_node.type,
        start=ts_node.start_byte,
        end=ts_node.end_byte,
        children=tuple(children),
        source=source,
        field_name=field_name,
        named=ts_node.is_named,
        missing=ts_node.is_missing,
    )


def parse_source(source: str | bytes) -> SyntaxTree:
    """Parse a compilation unit or a bare method/statement fragment."""
    if isinstance(source, bytes):
        try:
            text = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise UnreadableInput(str(exc)) from exc
        data = source
    else:
        text = source
        data = source.encode("utf-8")
    ts_tree = _parser().parse(data)
    if ts_tree is None:
        raise FatalParse("parser returned no tree")
    root = _convert(ts_tree.root_node, data, None)
    # The grammar's root may stop short of trailing whitespace.
    if root.start != 0 or root.end != len(data):
        root = AstNode(root.kind, 0, len(data), root.children, data)
    errors = tuple(
        (n.span, "missing " + n.kind if n.missing else "syntax error")
        for n in root.walk()
        if n.is_error
    )
    return SyntaxTree(text, root, errors)


@functools.lru_cache(maxsize=4096)
def parse_cached(source: str) -> SyntaxTree:
    return parse_source(source)


# -- test discovery ------------------------------------------------------------

_CLASS_KINDS = frozenset({
    "class_declaration", "enum_declaration", "record_declaration",
    "interface_declaration",
})


def _annotation_names(decl: AstNode) -> tuple[str, ...]:
    modifiers = next((c for c in decl.children if c.kind == "modifiers"), None)
    if modifiers is None:
        return ()
    names = []
    for c in modifiers.children:
        if c.kind in ("marker_annotation", "annotation"):
            name = c.child("name")
            if name is not None:
                names.append(name.text.rsplit(".", 1)[-1])
    return tuple(names)


def statement_children(block: AstNode) -> tuple[AstNode, ...]:
    """Statements directly inside a block, comments and braces excluded."""
    return tuple(c for c in block.children if c.named and not c.is_comment)


def is_test_method(decl: AstNode) -> bool:
    name = decl.child("name")
    if name is None:
        return False
    return bool(TEST_ANNOTATIONS.intersection(_annotation_names(decl))) or name.text.startswith("test")


def extract_test_methods(tree: SyntaxTree) -> list[TestMethod]:
    """All JUnit test methods with a body, in source order."""
    found: list[TestMethod] = []

    def visit(node: AstNode, class_name: str) -> None:
        for child in node.children:
            if child.kind in _CLASS_KINDS:
                name = child.child("name")
                visit(child, name.text if name is not None else class_name)
            elif child.kind == "method_declaration":
                body = child.child("body")
                if body is not None and is_test_method(child):
                    found.append(TestMethod(
                        name=child.child("name").text,
                        class_name=class_name,
                        annotations=_annotation_names(child),
                        body=statement_children(body),
                        declaration_node=child,
                        parse_error=_first_error(child),
                    ))
                # methods of anonymous/local classes are not tests
            elif child.named and not child.is_comment:
                visit(child, class_name)

    visit(tree.root, "")
    return found


def class_method_names(tree: SyntaxTree) -> dict[str, set[str]]:
    """Method names declared directly in each class, keyed by class name."""
    out: dict[str, set[str]] = {}

    def visit(node: AstNode, class_name: str) -> None:
        for child in node.children:
            if child.kind in _CLASS_KINDS:
                name = child.child("name")
                visit(child, name.text if name is not None else class_name)
            elif child.kind == "method_declaration":
                name = child.child("name")
                if name is not None:
                    out.setdefault(class_name, set()).add(name.text)
            elif child.named and not child.is_comment:
                visit(child, class_name)

    visit(tree.root, "")
    return out


def _first_error(node: AstNode) -> str | None:
    for n in node.walk():
        if n.is_error:
            what = f"missing {n.kind}" if n.missing else "syntax error"
            return f"{what} at bytes {n.start}..{n.end}"
    return None


# -- variable names and read/write sets ----------------------------------------

def _is_name_identifier(node: AstNode, parent: AstNode | None) -> bool:
    """Whether an ``identifier`` node denotes a (possibly free) variable."""
    if parent is None:
        return True
    pk, fname = parent.kind, node.field_name
    if pk == "method_invocation" and fname == "name":
        return False
    if pk == "field_access" and fname == "field":
        obj = parent.child("object")
        return obj is not None and obj.kind == "this"
    if pk in ("marker_annotation", "annotation", "scoped_identifier",
              "labeled_statement", "break_statement", "continue_statement",
              "method_declaration", "constructor_declaration",
              "class_declaration", "enum_declaration", "record_declaration",
              "interface_declaration", "annotation_argument_list",
              "element_value_pair", "enum_constant"):
        return False
    if pk == "method_reference":
        named = parent.named_children
        return bool(named) and named[0] is node
    return True


def iter_names(node: AstNode) -> Iterator[AstNode]:
    """Identifier nodes under ``node`` that name variables, in source order."""

    def rec(n: AstNode, parent: AstNode | None) -> Iterator[AstNode]:
        if n.kind == "identifier":
            if _is_name_identifier(n, parent):
                yield n
            return
        for c in n.children:
            yield from rec(c, n)

    yield from rec(node, None)


def root_ref(expr: AstNode | None) -> AstNode | None:
    """The identifier tracked for a reference expression (``a`` in ``a.b[i]``)."""
    while expr is not None:
        k = expr.kind
        if k == "identifier":
            return expr
        if k == "field_access":
            obj = expr.child("object")
            if obj is not None and obj.kind == "this":
                return expr.child("field")
            expr = obj
        elif k == "array_access":
            expr = expr.child("array")
        elif k == "parenthesized_expression":
            inner = expr.named_children
            expr = inner[0] if inner else None
        elif k == "cast_expression":
            expr = expr.child("value")
        elif k == "method_invocation":
            expr = expr.child("object")
        else:
            return None
    return None


def _is_modifying(name: str, keywords: Sequence[str]) -> bool:
    lowered = name.lower()
    return any(lowered.startswith(k) for k in keywords)


class _RwCollector:
    def __init__(self, keywords: Sequence[str]):
        self.keywords = tuple(k.lower() for k in keywords)
        self.reads: set[str] = set()
        self.writes: set[str] = set()

    def visit(self, node: AstNode, parent: AstNode | None = None, skip: AstNode | None = None) -> None:
        k = node.kind
        if node is skip:
            return
        if k == "identifier":
            if _is_name_identifier(node, parent):
                self.reads.add(node.text)
            return
        if node.is_comment:
            return
        if k == "assignment_expression":
            left, right = node.child("left"), node.child("right")
            op = node.child("operator")
            target = root_ref(left)
            if target is not None:
                self.writes.add(target.text)
                if op is not None and op.text != "=":
                    self.reads.add(target.text)
            if left is not None:
                self.visit(left, node, skip=target)
            if right is not None:
                self.visit(right, node)
            return
        if k == "variable_declarator":
            name = node.child("name")
            if name is not None:
                self.writes.add(name.text)
            for c in node.children:
                if c is not name:
                    self.visit(c, node)
            return
        if k in ("enhanced_for_statement", "catch_formal_parameter", "resource"):
            name = node.child("name")
            if name is not None:
                self.writes.add(name.text)
            for c in node.children:
                if c is not name:
                    self.visit(c, node)
            return
        if k == "update_expression":
            target = root_ref(next(iter(node.named_children), None))
            if target is not None:
                self.reads.add(target.text)
                self.writes.add(target.text)
        if k == "method_invocation":
            name = node.child("name")
            if name is not None and _is_modifying(name.text, self.keywords):
                receiver = root_ref(node.child("object"))
                if receiver is not None:
                    self.writes.add(receiver.text)
                args = node.child("arguments")
                for arg in args.named_children if args is not None else ():
                    ref = root_ref(arg) if arg.kind != "method_invocation" else None
                    if ref is not None:
                        self.writes.add(ref.text)
        if k == "lambda_expression":
            params = node.child("parameters")
            for c in node.children:
                if c is not params:
                    self.visit(c, node)
            return
        for c in node.children:
            self.visit(c, node, skip)


def _is_expression_kind(kind: str) -> bool:
    return kind in ("identifier", "this") or kind.endswith(
        ("expression", "invocation", "literal", "access"))


def extract_rw_sets(
    statement_node: AstNode,
    keywords: Sequence[str] = DEFAULT_MODIFICATION_KEYWORDS,
) -> tuple[frozenset[str], frozenset[str]]:
    """Read and write variable sets of one statement.

    Control structures get the union over header and body. Raises
    :class:`UnsupportedStatement` for nodes that are not statements or
    expressions.
    """
    kind = statement_node.kind
    if kind not in STATEMENT_KINDS and not _is_expression_kind(kind):
        raise UnsupportedStatement(kind)
    collector = _RwCollector(keywords)
    collector.visit(statement_node)
    return frozenset(collector.reads), frozenset(collector.writes)


def mentioned_names(node: AstNode) -> frozenset[str]:
    return frozenset(n.text for n in iter_names(node))


# -- tokens ------------------------------------------------------------------

def _leaves(node: AstNode) -> Iterator[AstNode]:
    if not node.children:
        yield node
        return
    for c in node.children:
        yield from _leaves(c)


def token_stream(node: AstNode, strip_comments: bool = False) -> list[Token]:
    """Lexical tokens under ``node`` in source order; whitespace never appears."""
    tokens = []
    for leaf in _leaves(node):
        if leaf.missing or leaf.start == leaf.end:
            continue
        if strip_comments and leaf.is_comment:
            continue
        tokens.append(Token(leaf.kind, leaf.text))
    return tokens


@functools.lru_cache(maxsize=8192)
def tokenize(source: str, strip_comments: bool = False) -> tuple[Token, ...]:
    """Token stream of a source fragment."""
    return tuple(token_stream(parse_source(source).root, strip_comments))


def tokens_equal(a: Iterable[Token], b: Iterable[Token]) -> bool:
    return list(a) == list(b)


# -- small helpers shared by other modules -------------------------------------

def is_valid_identifier(name: str) -> bool:
    return bool(_IDENTIFIER_RE.match(name)) and name not in JAVA_KEYWORDS


def line_indent(source: bytes, offset: int) -> str:
    """Whitespace between the start of the line and ``offset``, or '' if code precedes it."""
    line_start = source.rfind(b"\n", 0, offset) + 1
    prefix = source[line_start:offset]
    return prefix.decode("utf-8") if not prefix.strip() else ""


def starts_line(source: bytes, offset: int) -> bool:
    line_start = source.rfind(b"\n", 0, offset) + 1
    return not source[line_start:offset].strip()


def find_methods(tree: SyntaxTree) -> list[AstNode]:
    return [n for n in tree.root.walk() if n.kind == "method_declaration"]


def declared_locals(method_or_block: AstNode) -> list[str]:
    """Local variable names declared anywhere in a method body, first occurrence order."""
    names: list[str] = []
    body = method_or_block.child("body") if method_or_block.kind == "method_declaration" else method_or_block
    if body is None:
        return names
    for n in body.walk():
        name = None
        if n.kind in ("variable_declarator", "enhanced_for_statement",
                      "catch_formal_parameter", "resource"):
            name = n.child("name")
        if name is not None and name.kind == "identifier" and name.text not in names:
            names.append(name.text)
    return names
