"""CodeBLEU for statement-sized Java fragments, and the node distance built on it.

The score mixes four components, each in [0, 1]:

* n-gram BLEU over lexical tokens,
* the same BLEU with unigram matches on Java keywords up-weighted,
* the fraction of the reference's syntax subtrees found in the candidate,
* the fraction of the reference's def-use pairs found in the candidate,
  with variable names normalised by first appearance.
"""

from __future__ import annotations

import functools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .java_ast import (
    DEFAULT_MODIFICATION_KEYWORDS,
    JAVA_KEYWORDS,
    NORMAL_STATEMENT_KINDS,
    STATEMENT_KINDS,
    AstNode,
    UnsupportedStatement,
    extract_rw_sets,
    iter_names,
    parse_source,
    token_stream,
)

logger = logging.getLogger(__name__)


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class CodeBleuConfig:
    alpha: float = 0.25
    beta: float = 0.25
    gamma: float = 0.25
    delta: float = 0.25
    max_ngram: int = 4
    keyword_weight: float = 5.0

    def __post_init__(self):
        weights = self.weights
        if any(w < 0 for w in weights):
            raise ValueError(f"weights must be nonnegative: {weights}")
        if not math.isclose(sum(weights), 1.0, abs_tol=1e-9):
            raise ValueError(f"weights must sum to 1, got {sum(weights)}")
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be positive")
        if self.keyword_weight < 1:
            raise ValueError("keyword_weight must be >= 1")

    @property
    def weights(self) -> tuple[float, float, float, float]:
        return (self.alpha, self.beta, self.gamma, self.delta)


DEFAULT_CONFIG = CodeBleuConfig()


@dataclass(frozen=True)
class CodeBleuBreakdown:
    bleu: float
    weighted_bleu: float
    ast_match: float
    dataflow_match: float
    score: float

    @property
    def components(self) -> tuple[float, float, float, float]:
        return (self.bleu, self.weighted_bleu, self.ast_match, self.dataflow_match)


@dataclass(frozen=True)
class _Fragment:
    tokens: tuple[str, ...]
    subtrees: Counter
    dataflow: Counter


def _sexp(node: AstNode) -> str:
    inner = [_sexp(c) for c in node.named_children if not c.is_comment]
    return f"({node.kind}{' ' + ' '.join(inner) if inner else ''})"


def _statement_nodes(root: AstNode) -> list[AstNode]:
    return [n for n in root.walk() if n.kind in NORMAL_STATEMENT_KINDS]


def _dataflow_pairs(root: AstNode) -> Counter:
    order: dict[str, str] = {}
    for n in iter_names(root):
        order.setdefault(n.text, f"var_{len(order)}")
    pairs: Counter = Counter()
    statements = _statement_nodes(root)
    if not statements and root.named_children and root.named_children[0].kind not in STATEMENT_KINDS:
        statements = list(root.named_children[:1])
    for stmt in statements:
        try:
            reads, writes = extract_rw_sets(stmt, DEFAULT_MODIFICATION_KEYWORDS)
        except UnsupportedStatement:
            continue
        for w in sorted(writes):
            nw = order.get(w, w)
            if reads:
                pairs.update((nw, order.get(r, r)) for r in reads)
            else:
                pairs[(nw, None)] += 1
    return pairs


@functools.lru_cache(maxsize=16384)
def _fragment(code: str) -> _Fragment:
    root = parse_source(code).root
    tokens = tuple(t.text for t in token_stream(root, strip_comments=True))
    if not tokens:
        tokens = tuple(code.split())
    subtrees = Counter(
        _sexp(n) for n in root.walk()
        if n.named and n is not root and not n.is_comment
    )
    return _Fragment(tokens, subtrees, _dataflow_pairs(root))


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int,
          unigram_weight=None) -> float:
    if not candidate or not reference:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand, ref = _ngrams(candidate, n), _ngrams(reference, n)
        if n == 1:
            w = unigram_weight or (lambda g: 1.0)
            matched = sum(min(c, ref[g]) * w(g) for g, c in cand.items())
            total = sum(c * w(g) for g, c in cand.items())
            if matched == 0:
                return 0.0
            p = matched / total
        else:
            matched = sum(min(c, ref[g]) for g, c in cand.items())
            total = sum(cand.values())
            p = (matched + 1) / (total + 1)
        log_sum += math.log(p)
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * math.exp(log_sum / max_n)


def _match_ratio(candidate: Counter, reference: Counter) -> float:
    if not reference:
        return 1.0 if not candidate else 0.0
    matched = sum(min(c, candidate[k]) for k, c in reference.items())
    return matched / sum(reference.values())


def codebleu_breakdown(candidate: str, reference: str,
                       config: CodeBleuConfig = DEFAULT_CONFIG) -> CodeBleuBreakdown:
    if not candidate.strip() or not reference.strip():
        raise EmptyInput("codebleu needs two non-empty fragments")
    cand, ref = _fragment(candidate), _fragment(reference)
    kw = config.keyword_weight

    def keyword_weight(gram: tuple[str, ...]) -> float:
        return kw if gram[0] in JAVA_KEYWORDS else 1.0

    bleu = _bleu(cand.tokens, ref.tokens, config.max_ngram)
    weighted = _bleu(cand.tokens, ref.tokens, config.max_ngram, keyword_weight)
    ast = _match_ratio(cand.subtrees, ref.subtrees)
    flow = _match_ratio(cand.dataflow, ref.dataflow)
    a, b, g, d = config.weights
    score = a * bleu + b * weighted + g * ast + d * flow
    return CodeBleuBreakdown(bleu, weighted, ast, flow, min(1.0, max(0.0, score)))


def codebleu(candidate: str, reference: str, config: CodeBleuConfig = DEFAULT_CONFIG) -> float:
    """CodeBLEU of ``candidate`` against ``reference``; 0 (with a warning) on empty input."""
    try:
        return codebleu_breakdown(candidate, reference, config).score
    except EmptyInput as exc:
        logger.warning("%s", exc)
        return 0.0


def node_distance(v1: AstNode, v2: AstNode, config: CodeBleuConfig = DEFAULT_CONFIG) -> float:
    """``type_match(v1, v2) * CodeBLEU(v1, v2)``; higher means closer."""
    if v1.kind != v2.kind:
        return 0.0
    return codebleu(v1.text, v2.text, config)
