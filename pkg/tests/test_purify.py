import json
from collections import Counter

import pytest
from conftest import FIXTURES
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import Interp, expected_slices

from testrefine.java_ast import extract_test_methods, parse_source, tokenize
from testrefine.purify import (
    Assertion,
    NoAssertions,
    Origin,
    PurifiedTest,
    TestPrefix,
    UnpurifiableTest,
    atomize_statements,
    build_dependency_graph,
    merge_by_prefix,
    purify,
    slice_for_assertion,
)
from testrefine.synth import random_test


def method(*lines, name="testX"):
    body = "\n".join(f"        {ln}" for ln in lines)
    src = f"class T {{\n    @Test\n    void {name}() {{\n{body}\n    }}\n}}\n"
    (m,) = extract_test_methods(parse_source(src))
    return m


def atoms(*lines):
    return atomize_statements(method(*lines).body)


def texts(statements):
    return [s.text for s in statements]


def single(prefix_lines, assertion_line):
    *prefix, last = atoms(*prefix_lines, assertion_line)
    return TestPrefix(tuple(prefix)), Assertion(last, 0)


class TestAtomize:
    def test_multi_declaration(self):
        assert texts(atoms("int a, b;")) == ["int a;", "int b;"]

    def test_chained_assignment_right_to_left(self):
        assert texts(atoms("a = b = 1;")) == ["b = 1;", "a = b;"]

    def test_control_is_one_unit(self):
        (loop,) = atoms("for (int i = 0; i < 3; i++) { x.add(1); }")
        assert loop.kind == "control" and loop.control
        assert len(loop.body) == 1 and loop.body[0].writes == {"x"}

    def test_normal_statements_have_no_body(self):
        (s,) = atoms("foo.bar().baz();")
        assert s.kind == "normal" and not s.control and s.body is None

    def test_reads_and_writes_may_overlap(self):
        (s,) = atoms("a = a + 1;")
        assert s.reads & s.writes == {"a"}

    def test_typed_split_keeps_shared_type(self):
        assert texts(atoms("final List<String> xs = new ArrayList<>(), ys;")) == [
            "final List<String> xs = new ArrayList<>();", "final List<String> ys;"]

    def test_unrecognised_statements_pass_through(self):
        (s,) = atoms("label: { x = 1; }")
        assert s.text == "label: { x = 1; }"


_names = st.sampled_from(["a", "b", "c", "d"])


@st.composite
def int_exprs(draw, depth=2):
    if depth == 0 or draw(st.booleans()):
        return draw(st.one_of(_names, st.integers(0, 9).map(str)))
    op = draw(st.sampled_from(["+", "-", "*"]))
    return f"({draw(int_exprs(depth - 1))} {op} {draw(int_exprs(depth - 1))})"


@st.composite
def chains(draw):
    targets = draw(st.lists(_names, min_size=2, max_size=4, unique=True))
    ops = [draw(st.sampled_from(["=", "=", "+=", "-=", "*="])) for _ in targets]
    text = "".join(f"{t} {op} " for t, op in zip(targets, ops)) + draw(int_exprs()) + ";"
    return text


@settings(max_examples=200, deadline=None)
@given(chains(), st.lists(st.integers(-5, 5), min_size=4, max_size=4))
def test_chain_decomposition_matches_interpreter(chain, init):
    env = dict(zip("abcd", init))
    split = texts(atoms(chain))
    assert len(split) > 1
    assert Interp(env).run(chain) == Interp(env).run("\n".join(split))


@settings(max_examples=100, deadline=None)
@given(st.lists(int_exprs(), min_size=2, max_size=4), st.lists(st.integers(-5, 5), min_size=4, max_size=4))
def test_declaration_split_matches_interpreter(values, init):
    names = ["w", "x", "y", "z"][:len(values)]
    decl = "int " + ", ".join(f"{n} = {v}" for n, v in zip(names, values)) + ";"
    env = dict(zip("abcd", init))
    assert Interp(env).run(decl) == Interp(env).run("\n".join(texts(atoms(decl))))


DEPENDENCE_CASES = json.loads((FIXTURES / "dependence_cases.json").read_text())


@pytest.mark.parametrize("case", DEPENDENCE_CASES, ids=lambda c: c["prefix"][0][:30])
def test_dependency_graph_against_hand_computed_edges(case):
    prefix, assertion = single(case["prefix"], case["assertion"])
    graph = build_dependency_graph(prefix, assertion)
    assert {(w, r) for w, r in graph.edges if w != r} == {tuple(e) for e in case["edges"]}
    mentioned = set().union(*(s.reads | s.writes for s in (*prefix.statements, assertion.statement)))
    assert graph.vertices == mentioned
    assert all(w in graph.vertices and r in graph.vertices for w, r in graph.edges)


def test_self_edges_for_read_write_overlap():
    prefix, assertion = single(["a = a + 1;"], "assertEquals(2, a);")
    assert ("a", "a") in build_dependency_graph(prefix, assertion).edges


def test_cyclic_graph_reachability_terminates():
    prefix, assertion = single(["x = y;", "y = z;", "z = x;"], "assertEquals(1, x);")
    graph = build_dependency_graph(prefix, assertion)
    assert graph.reachable({"x"}) == {"x", "y", "z"}


class TestSlice:
    def _slice(self, prefix_lines, assertion_line):
        prefix, assertion = single(prefix_lines, assertion_line)
        return texts(slice_for_assertion(prefix, assertion, build_dependency_graph(prefix, assertion)).statements)

    MATRIX_PREFIX = ["RealMatrix m = new RealMatrixImpl(subTestData);",
                      "RealMatrix mColumn3 = new RealMatrixImpl(subColumn3);"]

    def test_matrix_exception_case(self):
        got = self._slice(self.MATRIX_PREFIX,
                          "assertThrows(MatrixIndexException.class, () -> m.getColumnMatrix(5));")
        assert got == ["RealMatrix m = new RealMatrixImpl(subTestData);"]

    def test_matrix_valid_case(self):
        got = self._slice(self.MATRIX_PREFIX, 'assertEquals("Column3", mColumn3, m.getColumnMatrix(3));')
        assert got == self.MATRIX_PREFIX

    def test_fully_relevant_prefix_unchanged(self):
        prefix = ["int a = 1;", "int b = a + 1;", "list.add(b);"]
        assert self._slice(prefix, "assertEquals(1, list.size());") == prefix

    def test_bare_call_without_writes_is_removed(self):
        assert self._slice(["int a = 1;", "System.out.println(a);"], "assertEquals(1, a);") == ["int a = 1;"]

    def test_empty_control_removed(self):
        assert self._slice(["int a = 1;", "if (a > 0) { }"], "assertEquals(1, a);") == ["int a = 1;"]

    def test_control_with_nested_assertion_always_kept(self):
        got = self._slice(["int a = 1;", "int b = 2;", "if (b > 0) { assertTrue(b > 1); }"],
                          "assertEquals(1, a);")
        assert got == ["int a = 1;", "int b = 2;", "if (b > 0) { assertTrue(b > 1); }"]

    def test_order_preserved(self):
        got = self._slice(["int c = 3;", "int a = 1;", "int unused = 0;", "int b = a;"],
                          "assertEquals(c, b);")
        assert got == ["int c = 3;", "int a = 1;", "int b = a;"]


def _purified(prefix_lines, assertion_line, ordinal):
    prefix, assertion = single(prefix_lines, assertion_line)
    return PurifiedTest(prefix, (Assertion(assertion.statement, ordinal),), Origin("t", (ordinal,)),
                        method("int unused = 0;"))


class TestMerge:
    def test_identical_prefixes_merge_in_source_order(self):
        a = _purified(["int a = 1;"], "assertEquals(1, a);", 0)
        b = _purified(["int a = 1; // same"], "assertTrue(a > 0);", 1)
        (merged,) = merge_by_prefix([b, a])
        assert [x.index_in_source for x in merged.assertions] == [0, 1]
        assert merged.origin.assertion_ordinals == (0, 1)

    def test_different_prefixes_kept(self):
        a = _purified(["int a = 1;"], "assertEquals(1, a);", 0)
        b = _purified(["int a = 2;"], "assertEquals(2, a);", 1)
        assert merge_by_prefix([a, b]) == [a, b]

    def test_first_occurrence_group_order(self):
        a = _purified(["int b = 1;"], "assertEquals(1, b);", 0)
        b = _purified(["int a = 1;"], "assertEquals(1, a);", 1)
        c = _purified(["int b = 1;"], "assertTrue(b > 0);", 2)
        out = merge_by_prefix([a, b, c])
        assert [t.origin.assertion_ordinals for t in out] == [(0, 2), (1,)]

    def test_unreduced_test_is_reconstituted(self):
        m = method("int a = 1;", "int b = a + 1;", "assertTrue(b > a);", "assertEquals(2, b);")
        (p,) = purify(m)
        assert p.name == "testX"
        assert tokenize(p.render()) == tokenize(m.declaration_node.text)
        assert texts(p.statements()) == ["int a = 1;", "int b = a + 1;", "assertTrue(b > a);",
                                          "assertEquals(2, b);"]


class TestPurify:
    def test_matrix_example(self, matrix_purified):
        first, second = matrix_purified
        assert first.name == "testGetColumnMatrix_1" and second.name == "testGetColumnMatrix_2"
        assert texts(first.statements()) == [
            "RealMatrix m = new RealMatrixImpl(subTestData);",
            "RealMatrix mColumn3 = new RealMatrixImpl(subColumn3);",
            'assertEquals("Column3", mColumn3, m.getColumnMatrix(3));',
        ]
        assert texts(second.statements()) == [
            "RealMatrix m = new RealMatrixImpl(subTestData);",
            "assertThrows(MatrixIndexException.class, () -> m.getColumnMatrix(5));",
        ]
        assert first.origin == Origin("testGetColumnMatrix", (0,))
        assert second.origin == Origin("testGetColumnMatrix", (1,))

    def test_render_is_valid_java(self, matrix_purified):
        for p in matrix_purified:
            assert not parse_source(p.render()).parse_errors

    def test_single_assertion(self):
        m = method("int a = 1;", "int junk = 2;", "assertEquals(1, a);")
        (p,) = purify(m)
        assert texts(p.prefix.statements) == ["int a = 1;"]

    def test_no_assertions(self):
        with pytest.raises(NoAssertions):
            purify(method("engine.start();"))

    def test_nested_assertion_after_last_top_level_one(self):
        with pytest.raises(UnpurifiableTest):
            purify(method("assertTrue(ok);", "for (int i = 0; i < 2; i++) { assertTrue(i < 2); }"))

    def test_verify_and_fail_are_assertions(self):
        out = purify(method("Repo r = mock(Repo.class);", "verify(r).save();", 'fail("boom");'))
        assert [a.statement.text for p in out for a in p.assertions] == ["verify(r).save();", 'fail("boom");']

    def test_prefix_holds_no_assertions(self):
        for p in purify(method("int a = 1;", "assertEquals(1, a);", "a = 2;", "assertEquals(2, a);")):
            assert not any(s.is_assertion for s in p.prefix.statements)

    def test_purified_test_requires_assertions(self):
        with pytest.raises(ValueError):
            PurifiedTest(TestPrefix(()), (), Origin("t", ()), method("int a = 1;"))


def _synthetic(seed):
    t = random_test(seed)
    (m,) = extract_test_methods(parse_source(t.source))
    return t, m, purify(m)


seeds = st.integers(min_value=0, max_value=10**7)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_slices_match_bruteforce_oracle(seed):
    t, _, out = _synthetic(seed)
    expected = expected_slices(t.atoms)
    by_ordinal = {o: p for p in out for o in p.origin.assertion_ordinals}
    assert sorted(by_ordinal) == sorted(expected)
    for ordinal, want in expected.items():
        assert texts(by_ordinal[ordinal].prefix.statements) == want


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_assertion_conservation_and_distinct_prefixes(seed):
    t, m, out = _synthetic(seed)
    original = Counter(tokenize(a.text) for a in t.atoms if a.assertion)
    assert Counter(tokenize(a.statement.text) for p in out for a in p.assertions) == original
    keys = [p.prefix.key() for p in out]
    assert len(keys) == len(set(keys))


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_slice_soundness(seed):
    t, m, out = _synthetic(seed)
    original = [tokenize(a.text) for a in t.atoms]
    for p in out:
        seen = [tokenize(s.text) for s in p.prefix.statements]
        # retained statements appear in the original, in order, each at most once
        it = iter(original)
        assert all(any(x == y for y in it) for x in seen)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_slice_closure(seed):
    t, m, out = _synthetic(seed)
    declared = {n for a in t.atoms for n in a.writes}
    for p in out:
        written = set().union(*(s.writes for s in p.prefix.statements))
        for a in p.assertions:
            # every non-free name the assertion reads is produced by the prefix,
            # unless no statement before it ever wrote it
            before = {n for x in t.atoms[:_position(t, a)] for n in x.writes}
            for name in a.statement.reads & declared & before:
                assert name in written


def _position(t, assertion):
    positions = t.assertion_positions
    return positions[assertion.index_in_source]


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_merge_idempotent(seed):
    _, _, out = _synthetic(seed)
    singles = [
        PurifiedTest(p.prefix, (a,), Origin(p.origin.test_name, (a.index_in_source,)), p.method)
        for p in out for a in p.assertions
    ]
    regrouped = merge_by_prefix(singles)
    assert [p.origin.assertion_ordinals for p in regrouped] == [
        p.origin.assertion_ordinals for p in merge_by_prefix(regrouped)]
    assert sorted(p.origin.assertion_ordinals for p in regrouped) == sorted(
        p.origin.assertion_ordinals for p in out)
