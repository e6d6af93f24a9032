"""Split multi-scenario tests into purified single-scenario tests.

Three passes over a test method body:

1. statement atomization: multi-identifier declarations and chained
   assignments become one statement per write; control structures stay whole;
2. per-assertion backward slicing over a flow-insensitive variable
   dependency graph built from the statements preceding the assertion;
3. merging of sliced tests whose prefixes are token-identical.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .java_ast import (
    CONTROL_STATEMENT_KINDS,
    DEFAULT_MODIFICATION_KEYWORDS,
    AstNode,
    TestMethod,
    Token,
    UnsupportedStatement,
    extract_rw_sets,
    line_indent,
    mentioned_names,
    parse_source,
    STATEMENT_KINDS,
    statement_children,
    tokenize,
)

ASSERTION_NAMES = frozenset({"fail", "assertThrows", "assertAll", "verify"})
_ASSERTION_PREFIXES = ("assert", "verify")


class NoAssertions(ValueError):
    """The test has no top-level assertion; it is passed through unmodified."""


class UnpurifiableTest(ValueError):
    """Slicing would drop assertion-bearing code; the test is passed through."""


@dataclass(frozen=True)
class AtomizedStatement:
    kind: str  # "normal" or "control"
    reads: frozenset[str]
    writes: frozenset[str]
    control: bool
    node: AstNode
    text: str
    body: tuple["AtomizedStatement", ...] | None = None
    contains_assertion: bool = False
    unsupported: bool = False

    @property
    def is_assertion(self) -> bool:
        return not self.control and is_assertion_node(self.node) and self.text == self.node.text

    def tokens(self, strip_comments: bool = True) -> tuple[Token, ...]:
        return tokenize(self.text, strip_comments)


@dataclass(frozen=True)
class Assertion:
    statement: AtomizedStatement
    index_in_source: int


@dataclass(frozen=True)
class TestPrefix:
    statements: tuple[AtomizedStatement, ...] = ()

    __test__ = False

    def key(self) -> tuple[tuple[Token, ...], ...]:
        return tuple(s.tokens() for s in self.statements)


@dataclass(frozen=True)
class Origin:
    test_name: str
    assertion_ordinals: tuple[int, ...]


@dataclass(frozen=True)
class PurifiedTest:
    prefix: TestPrefix
    assertions: tuple[Assertion, ...]
    origin: Origin
    method: TestMethod = field(repr=False, compare=False)
    name: str = ""

    def __post_init__(self):
        if not self.assertions:
            raise ValueError("a purified test needs at least one assertion")
        if not self.name:
            object.__setattr__(self, "name", self.method.name)

    def statements(self) -> list[AtomizedStatement]:
        return [*self.prefix.statements, *(a.statement for a in self.assertions)]

    def render(self) -> str:
        return render_method(self.method, self.name, self.statements())


@dataclass(frozen=True)
class DependencyGraph:
    vertices: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def successors(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {v: set() for v in self.vertices}
        for src, dst in self.edges:
            out[src].add(dst)
        return out

    def reachable(self, starts: Iterable[str]) -> frozenset[str]:
        """Vertices reachable from ``starts``, the start vertices included."""
        succ = self.successors()
        seen = set(starts)
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for w in succ.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return frozenset(seen)


# -- assertions ----------------------------------------------------------------

def _is_assertion_name(name: str) -> bool:
    return name in ASSERTION_NAMES or name.startswith(_ASSERTION_PREFIXES)


def is_assertion_node(node: AstNode) -> bool:
    """Statement-level call to an assertion API (assert*, fail, verify, AssertJ chains)."""
    if node.kind == "assert_statement":
        return True
    if node.kind != "expression_statement":
        return False
    expr = next(iter(node.named_children), None)
    while expr is not None and expr.kind == "method_invocation":
        name = expr.child("name")
        if name is not None and _is_assertion_name(name.text):
            return True
        expr = expr.child("object")
    return False


def _contains_assertion(node: AstNode) -> bool:
    return any(is_assertion_node(n) for n in node.walk())


# -- atomization -------------------------------------------------------------

_BODY_GROUPS = frozenset({
    "catch_clause", "finally_clause", "switch_block",
    "switch_block_statement_group", "switch_rule",
})


def _control_bodies(node: AstNode) -> list[AstNode]:
    """Statements nested directly in a control structure's blocks and branches."""
    if node.kind == "block":
        return list(statement_children(node))
    out: list[AstNode] = []
    for c in node.named_children:
        if c.is_comment:
            continue
        if c.kind == "block":
            out.extend(statement_children(c))
        elif c.kind in _BODY_GROUPS:
            out.extend(_control_bodies(c))
        elif c.kind in STATEMENT_KINDS and (
            c.field_name in ("consequence", "alternative", "body")
            or node.kind in ("labeled_statement", "switch_block_statement_group", "switch_rule")
        ):
            out.append(c)
    return out


def _is_simple_target(node: AstNode | None) -> bool:
    if node is None:
        return False
    if node.kind == "identifier":
        return True
    if node.kind == "field_access":
        obj, fld = node.child("object"), node.child("field")
        return obj is not None and obj.kind == "this" and fld is not None
    return False


def _assignment_chain(expr: AstNode, min_len: int = 2) -> tuple[list[tuple[AstNode, str]], AstNode] | None:
    """``a = b += c = v`` -> ([(a,'='), (b,'+='), (c,'=')], v), or None if not chained."""
    targets: list[tuple[AstNode, str]] = []
    while expr.kind == "assignment_expression":
        left, op = expr.child("left"), expr.child("operator")
        right = expr.child("right")
        if left is None or op is None or right is None:
            return None
        targets.append((left, op.text))
        expr = right
    if len(targets) < min_len:
        return None
    return targets, expr


def _chain_texts(targets: list[tuple[AstNode, str]], value: AstNode) -> list[str] | None:
    # Inner targets are re-read after assignment, so they must be plain names;
    # outer targets are evaluated before the right-hand side in Java.
    if not all(_is_simple_target(t) for t, _ in targets):
        return None
    texts = [f"{targets[-1][0].text} {targets[-1][1]} {value.text};"]
    for (target, op), (inner, _) in zip(reversed(targets[:-1]), reversed(targets[1:])):
        texts.append(f"{target.text} {op} {inner.text};")
    return texts


def _split_declaration(node: AstNode) -> list[str] | None:
    declarators = node.children_by_field("declarator")
    type_node = node.child("type")
    if type_node is None or not declarators:
        return None
    head = node.source[node.start:type_node.end].decode("utf-8")
    texts: list[str] = []
    for d in declarators:
        value = d.child("value")
        chain = _assignment_chain(value, min_len=1) if value is not None else None
        if chain is not None:
            targets, final = chain
            inner = _chain_texts(targets, final)
            if inner is not None:
                # `int a = b = 1;` -> `b = 1;` then `int a = b;`
                texts.extend(inner)
                name_part = d.source[d.start:value.start].decode("utf-8")
                texts.append(f"{head} {name_part}{targets[0][0].text};")
                continue
        texts.append(f"{head} {d.text};")
    if len(texts) == 1 and len(declarators) == 1:
        return None
    return texts


def _split_statement(node: AstNode) -> list[str] | None:
    if node.kind == "local_variable_declaration":
        return _split_declaration(node)
    if node.kind == "expression_statement":
        expr = next(iter(node.named_children), None)
        if expr is not None and expr.kind == "assignment_expression":
            chain = _assignment_chain(expr)
            if chain is not None:
                return _chain_texts(*chain)
    return None


def _atom(node: AstNode, text: str, keywords: Sequence[str], rw_node: AstNode | None = None) -> AtomizedStatement:
    control = node.kind in CONTROL_STATEMENT_KINDS
    unsupported = False
    try:
        reads, writes = extract_rw_sets(rw_node if rw_node is not None else node, keywords)
    except UnsupportedStatement:
        names = mentioned_names(node)
        reads, writes, unsupported = names, names, True
    body = None
    if control:
        body = tuple(atomize_statements(_control_bodies(node), keywords))
    return AtomizedStatement(
        kind="control" if control else "normal",
        reads=reads,
        writes=writes,
        control=control,
        node=node,
        text=text,
        body=body,
        contains_assertion=control and _contains_assertion(node),
        unsupported=unsupported,
    )


def atomize_statements(
    body: Sequence[AstNode],
    keywords: Sequence[str] = DEFAULT_MODIFICATION_KEYWORDS,
) -> list[AtomizedStatement]:
    """Break compound statements into atomized statements, preserving order."""
    out: list[AtomizedStatement] = []
    for node in body:
        if node.is_comment or not node.named:
            continue
        pieces = _split_statement(node)
        if pieces is None:
            out.append(_atom(node, node.text, keywords))
            continue
        for piece in pieces:
            parsed = parse_source(piece).root.named_children
            rw_node = parsed[0] if parsed else None
            out.append(_atom(node, piece, keywords, rw_node))
    return out


# -- slicing -----------------------------------------------------------------

def build_dependency_graph(prefix: TestPrefix, assertion: Assertion) -> DependencyGraph:
    """Edge ``w -> r`` for every write/read pair of every statement."""
    vertices: set[str] = set()
    edges: set[tuple[str, str]] = set()
    for s in (*prefix.statements, assertion.statement):
        vertices |= s.reads | s.writes
        edges.update((w, r) for w in s.writes for r in s.reads)
    return DependencyGraph(frozenset(vertices), frozenset(edges))


def slice_for_assertion(prefix: TestPrefix, assertion: Assertion, graph: DependencyGraph) -> TestPrefix:
    """Keep only prefix statements whose writes feed the assertion.

    Control structures holding nested assertions are always kept, so their
    reads join the slicing criterion.
    """
    criterion = set(assertion.statement.reads)
    for s in prefix.statements:
        if s.contains_assertion:
            criterion |= s.reads
    depends = graph.reachable(criterion)
    kept = []
    for s in prefix.statements:
        if s.control:
            if s.contains_assertion:
                kept.append(s)
            elif s.writes & depends and s.body:
                kept.append(s)
        elif s.writes & depends:
            kept.append(s)
    return TestPrefix(tuple(kept))


def merge_by_prefix(tests: Sequence[PurifiedTest]) -> list[PurifiedTest]:
    """Combine tests whose prefixes are token-identical (comments ignored)."""
    groups: dict[tuple, list[PurifiedTest]] = {}
    for t in tests:
        groups.setdefault(t.prefix.key(), []).append(t)
    merged = []
    for members in groups.values():
        if len(members) == 1:
            merged.append(members[0])
            continue
        assertions = sorted(
            (a for m in members for a in m.assertions), key=lambda a: a.index_in_source
        )
        first = members[0]
        merged.append(PurifiedTest(
            prefix=first.prefix,
            assertions=tuple(assertions),
            origin=Origin(first.origin.test_name, tuple(a.index_in_source for a in assertions)),
            method=first.method,
            name=first.name,
        ))
    return merged


def purify(
    test: TestMethod,
    keywords: Sequence[str] = DEFAULT_MODIFICATION_KEYWORDS,
) -> list[PurifiedTest]:
    """Purified single-scenario tests for ``test``, named ``<name>_<k>`` when split."""
    atoms = atomize_statements(test.body, keywords)
    positions = [i for i, a in enumerate(atoms) if a.is_assertion]
    if not positions:
        raise NoAssertions(f"{test.name}: no top-level assertion")
    trailing = atoms[positions[-1] + 1:]
    if any(a.contains_assertion for a in trailing):
        raise UnpurifiableTest(f"{test.name}: assertions nested after the last top-level assertion")

    singles = []
    for ordinal, pos in enumerate(positions):
        assertion = Assertion(atoms[pos], ordinal)
        prefix = TestPrefix(tuple(a for a in atoms[:pos] if not a.is_assertion))
        graph = build_dependency_graph(prefix, assertion)
        sliced = slice_for_assertion(prefix, assertion, graph)
        singles.append(PurifiedTest(sliced, (assertion,), Origin(test.name, (ordinal,)), test))

    merged = merge_by_prefix(singles)
    if len(merged) == 1:
        return merged
    return [
        PurifiedTest(p.prefix, p.assertions, p.origin, p.method, name=f"{test.name}_{k}")
        for k, p in enumerate(merged, start=1)
    ]


# -- rendering -----------------------------------------------------------------

def render_method(method: TestMethod, name: str, statements: Sequence[AtomizedStatement]) -> str:
    """Java source of ``method`` with its body replaced by ``statements``."""
    decl = method.declaration_node
    src = decl.source
    name_node = method.name_node
    block = method.block
    header = (
        src[decl.start:name_node.start].decode("utf-8")
        + name
        + src[name_node.end:block.start].decode("utf-8")
    )
    base = line_indent(src, decl.start)
    if method.body:
        indent = line_indent(src, method.body[0].start) or base + "    "
    else:
        indent = base + "    "
    lines = [header + "{"]
    lines.extend(indent + s.text for s in statements)
    lines.append(base + "}")
    return "\n".join(lines)


_SUFFIX_RE = re.compile(r"_(\d+)\Z")


def base_test_name(name: str) -> str:
    return _SUFFIX_RE.sub("", name)
