import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import ref_codebleu

from testrefine.java_ast import parse_source
from testrefine.similarity import (
    CodeBleuConfig,
    EmptyInput,
    codebleu,
    codebleu_breakdown,
    node_distance,
)
from testrefine.synth import random_test, realistic_class

# (candidate, reference, candidate def-use pairs, reference def-use pairs, frozen score)
GOLDENS = {
    "declaration_vs_return": (
        "int a = 1;", "return;",
        Counter({("var_0", None): 1}), Counter(),
        0.11193136679407538,
    ),
    "assert_argument_names": (
        "assertEquals(a, b);", "assertEquals(expected, actual);",
        Counter(), Counter(),
        0.6589144852233593,
    ),
    "renamed_declaration": (
        "RealMatrix m = new RealMatrixImpl(subTestData);",
        "RealMatrix matrixUnderTest = new RealMatrixImpl(subTestData);",
        Counter({("var_0", "var_1"): 1}), Counter({("var_0", "var_1"): 1}),
        0.8919067088042933,
    ),
    "hallucinated_call": (
        "m.getColumnMatrix(3);",
        "matrix.getColumnMatrix(matrix.getColumnDimension() - 1);",
        Counter(), Counter(),
        0.404361176373906,
    ),
}


@pytest.mark.parametrize("name", sorted(GOLDENS))
def test_golden_scores(name):
    cand, ref, cflow, rflow, frozen = GOLDENS[name]
    oracle = ref_codebleu(cand, ref, cflow, rflow)
    got = codebleu_breakdown(cand, ref)
    assert oracle[0] == pytest.approx(frozen, abs=1e-12)
    assert got.score == pytest.approx(frozen, abs=1e-12)
    assert got.components == pytest.approx(oracle[1:], abs=1e-12)


def test_declaration_vs_return_is_low():
    assert codebleu("int a = 1;", "return;") < 0.3


def test_assert_argument_names_default_threshold():
    # a pure argument rename scores below the 0.7 anchoring threshold
    score = codebleu("assertEquals(a, b);", "assertEquals(expected, actual);")
    assert 0 < score < 0.7


def test_renamed_declaration_clears_threshold():
    assert codebleu(*GOLDENS["renamed_declaration"][:2]) > 0.7


def test_identity():
    for code in ["int a = 1;", "x.add(y);", "assertEquals(1, f(2, 3));", "return;"]:
        assert codebleu(code, code) == 1.0


def test_bleu_only_weighting():
    cfg = CodeBleuConfig(1.0, 0.0, 0.0, 0.0)
    b = codebleu_breakdown("int a = 1;", "int b = 1;", cfg)
    assert b.score == pytest.approx(b.bleu)


def test_directional():
    a, b = "foo(a, b, c);", "foo(a);"
    assert codebleu(a, b) != codebleu(b, a)


def test_empty_input():
    with pytest.raises(EmptyInput):
        codebleu_breakdown("", "int a;")
    assert codebleu("  ", "int a;") == 0.0


@pytest.mark.parametrize("kwargs", [
    dict(alpha=0.5), dict(alpha=-0.25, beta=0.75), dict(max_ngram=0), dict(keyword_weight=0.5),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        CodeBleuConfig(**kwargs)


def test_keyword_weight_changes_weighted_bleu():
    plain = codebleu_breakdown("int a = 1;", "int b = 2;", CodeBleuConfig(keyword_weight=1.0))
    heavy = codebleu_breakdown("int a = 1;", "int b = 2;", CodeBleuConfig(keyword_weight=5.0))
    assert plain.weighted_bleu == pytest.approx(plain.bleu)
    assert heavy.weighted_bleu > plain.weighted_bleu


def _stmt(code):
    return parse_source(code).root.named_children[0]


def test_node_distance_identity_and_kind_mismatch():
    a = _stmt("RealMatrix m = new RealMatrixImpl(subTestData);")
    assert node_distance(a, a) == 1.0
    b = _stmt("m.getColumnMatrix(3);")
    assert node_distance(a, b) == 0.0
    assert node_distance(b, _stmt("RealMatrix m = new RealMatrixImpl(subTestData);")) == 0.0


def _nodes(seed):
    root = parse_source(realistic_class(seed)).root
    return [n for n in root.walk() if n.named and n.text.strip()]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**5), st.data())
def test_node_distance_properties(seed, data):
    nodes = _nodes(seed % 50)
    v1 = data.draw(st.sampled_from(nodes))
    v2 = data.draw(st.sampled_from(nodes))
    d = node_distance(v1, v2)
    assert 0.0 <= d <= 1.0
    assert node_distance(v1, v1) == 1.0
    if v1.kind != v2.kind:
        assert d == 0.0


java_ish = st.text(alphabet="abcxyz019 ()=+-;.,{}\"<>", min_size=1, max_size=40).filter(str.strip)


@settings(max_examples=200, deadline=None)
@given(java_ish, java_ish)
def test_score_is_convex_combination(a, b):
    br = codebleu_breakdown(a, b)
    assert all(0.0 <= c <= 1.0 for c in br.components)
    assert min(br.components) - 1e-12 <= br.score <= max(br.components) + 1e-12
    assert math.isclose(br.score, sum(0.25 * c for c in br.components), abs_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_statement_identity_on_synthetic_tests(seed):
    for atom in random_test(seed).atoms:
        assert codebleu(atom.text, atom.text) == pytest.approx(1.0)
