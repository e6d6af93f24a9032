"""Reference implementations that share no code with the package.

Each oracle is deliberately naive: a regex lexer, a Warshall closure, a
direct tree-sitter walk, a toy interpreter. They exist to pin golden
numbers and to cross-check the real implementations.
"""

from __future__ import annotations

import math
import re
from collections import Counter

import tree_sitter as ts
import tree_sitter_java as tsj

_LANG = ts.Language(tsj.language())

# -- lexer ------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r'"(?:\\.|[^"\\])*"'         # string literal
    r"|'(?:\\.|[^'\\])*'"        # char literal
    r"|\d+(?:\.\d+)?[lLfFdD]?"   # number
    r"|[A-Za-z_$][\w$]*"         # identifier / keyword
    r"|->|::|\+\+|--|&&|\|\||[=!<>+\-*/%&|^]=|<<|>>"
    r"|[^\s\w]"
)

KEYWORDS = frozenset("""
abstract assert boolean break byte case catch char class const continue default do
double else enum extends final finally float for goto if implements import instanceof
int interface long native new package private protected public return short static
strictfp super switch synchronized this throw throws transient try void volatile while
var record yield true false null
""".split())


def lex(code: str) -> list[str]:
    code = re.sub(r"//[^\n]*|/\*.*?\*/", " ", code, flags=re.S)
    return _TOKEN_RE.findall(code)


# -- CodeBLEU ---------------------------------------------------------------------

def _grams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def ref_bleu(cand: list[str], ref: list[str], max_n: int = 4, keyword_weight: float = 1.0) -> float:
    """Sentence BLEU: raw unigram precision, add-one for n > 1, standard brevity penalty."""
    logs = []
    for n in range(1, max_n + 1):
        c, r = _grams(cand, n), _grams(ref, n)
        if n == 1:
            w = {g: (keyword_weight if g[0] in KEYWORDS else 1.0) for g in c}
            num = sum(min(k, r[g]) * w[g] for g, k in c.items())
            den = sum(k * w[g] for g, k in c.items())
            if num == 0:
                return 0.0
            logs.append(math.log(num / den))
        else:
            num = sum(min(k, r[g]) for g, k in c.items())
            den = sum(c.values())
            logs.append(math.log((num + 1) / (den + 1)))
    bp = 1.0 if len(cand) > len(ref) else math.exp(1 - len(ref) / len(cand))
    return bp * math.exp(sum(logs) / max_n)


def ref_subtrees(code: str) -> Counter:
    tree = ts.Parser(_LANG).parse(code.encode())
    out = Counter()
    stack = list(tree.root_node.named_children)
    while stack:
        node = stack.pop()
        if node.type in ("line_comment", "block_comment"):
            continue
        out[re.sub(r"\w+: ", "", str(node))] += 1
        stack.extend(node.named_children)
    return out


def ref_ratio(cand: Counter, ref: Counter) -> float:
    if not ref:
        return 1.0 if not cand else 0.0
    return sum(min(k, cand[g]) for g, k in ref.items()) / sum(ref.values())


def ref_codebleu(cand: str, ref: str, cand_flow: Counter, ref_flow: Counter,
                 weights=(0.25, 0.25, 0.25, 0.25), keyword_weight: float = 5.0) -> tuple[float, ...]:
    """(score, bleu, weighted, ast, flow); dataflow pairs are supplied by hand."""
    tc, tr = lex(cand), lex(ref)
    parts = (
        ref_bleu(tc, tr),
        ref_bleu(tc, tr, keyword_weight=keyword_weight),
        ref_ratio(ref_subtrees(cand), ref_subtrees(ref)),
        ref_ratio(cand_flow, ref_flow),
    )
    return (sum(w * p for w, p in zip(weights, parts)), *parts)


# -- slicing ------------------------------------------------------------------------

def warshall_reach(edges: set[tuple[str, str]], starts: set[str]) -> set[str]:
    """Everything reachable from ``starts`` (inclusive) via a full transitive closure."""
    nodes = sorted({a for a, _ in edges} | {b for _, b in edges} | set(starts))
    idx = {n: i for i, n in enumerate(nodes)}
    size = len(nodes)
    m = [[i == j for j in range(size)] for i in range(size)]
    for a, b in edges:
        m[idx[a]][idx[b]] = True
    for k in range(size):
        for i in range(size):
            if m[i][k]:
                row_k = m[k]
                row_i = m[i]
                for j in range(size):
                    if row_k[j]:
                        row_i[j] = True
    return {nodes[j] for s in starts for j in range(size) if m[idx[s]][j]}


def expected_slices(atoms) -> dict[int, list[str]]:
    """assertion ordinal -> retained prefix texts, computed from generator ground truth."""
    out = {}
    ordinal = 0
    for pos, atom in enumerate(atoms):
        if not atom.assertion:
            continue
        prefix = [a for a in atoms[:pos] if not a.assertion]
        edges = {(w, r) for a in (*prefix, atom) for w in a.writes for r in a.reads}
        starts = set(atom.reads)
        for a in prefix:
            if a.nested_assertion:
                starts |= a.reads
        reach = warshall_reach(edges, starts)
        kept = [
            a.text for a in prefix
            if a.nested_assertion or (a.writes & reach and not a.empty_body)
        ]
        out[ordinal] = kept
        ordinal += 1
    return out


# -- toy interpreter ----------------------------------------------------------------

class Interp:
    """Evaluates int-only Java statements: declarations, (compound) assignment, + - *."""

    def __init__(self, env: dict[str, int] | None = None):
        self.env = dict(env or {})

    def run(self, body: str) -> dict[str, int]:
        tree = ts.Parser(_LANG).parse(body.encode())
        assert not tree.root_node.has_error, body
        for stmt in tree.root_node.named_children:
            self.stmt(stmt)
        return self.env

    def stmt(self, node):
        if node.type == "local_variable_declaration":
            for d in node.children_by_field_name("declarator"):
                value = d.child_by_field_name("value")
                self.env[d.child_by_field_name("name").text.decode()] = (
                    self.expr(value) if value is not None else 0)
        elif node.type == "expression_statement":
            self.expr(node.named_children[0])
        else:
            raise NotImplementedError(node.type)

    def expr(self, node) -> int:
        t = node.type
        if t == "decimal_integer_literal":
            return int(node.text)
        if t == "identifier":
            return self.env[node.text.decode()]
        if t == "parenthesized_expression":
            return self.expr(node.named_children[0])
        if t == "binary_expression":
            a, b = self.expr(node.child_by_field_name("left")), self.expr(node.child_by_field_name("right"))
            op = node.child_by_field_name("operator").text.decode()
            return {"+": a + b, "-": a - b, "*": a * b}[op]
        if t == "assignment_expression":
            name = node.child_by_field_name("left").text.decode()
            value = self.expr(node.child_by_field_name("right"))
            op = node.child_by_field_name("operator").text.decode()
            if op != "=":
                value = {"+=": self.env[name] + value, "-=": self.env[name] - value,
                         "*=": self.env[name] * value}[op]
            self.env[name] = value
            return value
        raise NotImplementedError(t)
