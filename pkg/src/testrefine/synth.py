"""Random Java test generators with known answers.

:func:`random_test` builds a test method whose atomized statements, and
their read/write sets, are known by construction. Slicing, merging and
read/write extraction are checked against that ground truth rather than
against the implementation.

:func:`realistic_class` / :func:`write_corpus` produce JUnit classes in
the style of real projects (collections, builders, exceptions, loops,
lambdas, comments) for corpus-scale preservation runs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

LOCALS = tuple(f"v{i}" for i in range(8))
FREE = ("f0", "f1", "seed")


@dataclass(frozen=True)
class TruthAtom:
    """One atomized statement as the generator intended it."""

    text: str
    reads: frozenset[str]
    writes: frozenset[str]
    kind: str = "normal"  # or "control"
    assertion: bool = False
    nested_assertion: bool = False
    empty_body: bool = False


@dataclass
class SyntheticTest:
    name: str
    source: str  # a full compilation unit holding one test
    raw_statements: list[str]
    atoms: list[TruthAtom] = field(default_factory=list)

    @property
    def assertion_positions(self) -> list[int]:
        return [i for i, a in enumerate(self.atoms) if a.assertion]


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.declared: list[str] = []
        self.loop_vars = 0

    def name(self) -> str:
        pool = self.declared or list(FREE)
        if self.rng.random() < 0.15:
            return self.rng.choice(FREE)
        return self.rng.choice(pool)

    def fresh(self) -> str:
        left = [v for v in LOCALS if v not in self.declared]
        return self.rng.choice(left) if left else self.rng.choice(LOCALS)

    def expr(self) -> tuple[str, frozenset[str]]:
        r = self.rng.random()
        if r < 0.2:
            return str(self.rng.randint(0, 9)), frozenset()
        a = self.name()
        if r < 0.45:
            return a, frozenset({a})
        if r < 0.65:
            b = self.name()
            return f"{a} + {b}", frozenset({a, b})
        if r < 0.8:
            return f"{a} * {self.rng.randint(2, 5)}", frozenset({a})
        if r < 0.9:
            return f"helper({a})", frozenset({a})
        return f"{a}.size()", frozenset({a})

    def declare(self, v: str) -> None:
        if v not in self.declared:
            self.declared.append(v)

    def simple(self) -> tuple[str, list[TruthAtom]]:
        """A raw statement and its atoms."""
        rng = self.rng
        k = rng.random()
        if k < 0.2 or not self.declared:
            v = self.fresh()
            e, rd = self.expr()
            self.declare(v)
            text = f"int {v} = {e};"
            return text, [TruthAtom(text, rd, frozenset({v}))]
        if k < 0.3:
            v1 = self.fresh()
            e1, r1 = self.expr()
            self.declare(v1)
            v2 = self.fresh()
            e2, r2 = self.expr()
            self.declare(v2)
            return (f"int {v1} = {e1}, {v2} = {e2};",
                    [TruthAtom(f"int {v1} = {e1};", r1, frozenset({v1})),
                     TruthAtom(f"int {v2} = {e2};", r2, frozenset({v2}))])
        if k < 0.45:
            v = self.name()
            e, rd = self.expr()
            text = f"{v} = {e};"
            return text, [TruthAtom(text, rd, frozenset({v}))]
        if k < 0.52:
            v = self.name()
            e, rd = self.expr()
            text = f"{v} += {e};"
            return text, [TruthAtom(text, rd | {v}, frozenset({v}))]
        if k < 0.6:
            a, b = self.name(), self.name()
            if a == b:
                b = self.fresh()
                self.declare(b)
            e, rd = self.expr()
            return (f"{a} = {b} = {e};",
                    [TruthAtom(f"{b} = {e};", rd, frozenset({b})),
                     TruthAtom(f"{a} = {b};", frozenset({b}), frozenset({a}))])
        if k < 0.72:
            recv = self.name()
            if rng.random() < 0.5:
                arg = self.name()
                method = rng.choice(["add", "put", "setValue", "insert", "removeAll"])
                text = f"{recv}.{method}({arg});"
                both = frozenset({recv, arg})
                return text, [TruthAtom(text, both, both)]
            method = rng.choice(["add", "push", "setSize", "clear"])
            arg = "" if method == "clear" else str(rng.randint(0, 9))
            text = f"{recv}.{method}({arg});"
            return text, [TruthAtom(text, frozenset({recv}), frozenset({recv}))]
        if k < 0.8:
            a = self.name()
            text = f"log({a});"
            return text, [TruthAtom(text, frozenset({a}), frozenset())]
        if k < 0.86:
            v = self.name()
            text = f"{v}++;"
            return text, [TruthAtom(text, frozenset({v}), frozenset({v}))]
        return self.control()

    def control(self) -> tuple[str, list[TruthAtom]]:
        rng = self.rng
        c = self.name()
        if rng.random() < 0.5:
            if rng.random() < 0.15:
                text = f"if ({c} > 0) {{ }}"
                return text, [TruthAtom(text, frozenset({c}), frozenset(), "control", empty_body=True)]
            v = self.name()
            e, rd = self.expr()
            text = f"if ({c} > 0) {{ {v} = {e}; }}"
            return text, [TruthAtom(text, rd | {c}, frozenset({v}), "control")]
        i = f"k{self.loop_vars}"
        self.loop_vars += 1
        v = self.name()
        text = f"for (int {i} = 0; {i} < {c}; {i}++) {{ {v} += {i}; }}"
        return text, [TruthAtom(text, frozenset({i, c, v}), frozenset({i, v}), "control")]

    def assertion(self, nested: bool = False) -> tuple[str, list[TruthAtom]]:
        rng = self.rng
        r = rng.random()
        a = self.name()
        if r < 0.4:
            e, rd = self.expr()
            body = f"assertEquals({e}, {a});"
            reads = rd | {a}
        elif r < 0.7:
            b = self.name()
            body = f"assertTrue({a} > {b});"
            reads = frozenset({a, b})
        else:
            body = f"assertNotNull({a});"
            reads = frozenset({a})
        if nested:
            c = self.name()
            text = f"if ({c} != 0) {{ {body} }}"
            return text, [TruthAtom(text, reads | {c}, frozenset(), "control", nested_assertion=True)]
        return body, [TruthAtom(body, reads, frozenset(), assertion=True)]


def random_test(seed: int, max_statements: int = 20, max_assertions: int = 4) -> SyntheticTest:
    """A test with 1..max_assertions top-level assertions and known atoms."""
    rng = random.Random(seed)
    gen = _Gen(rng)
    n_assert = rng.randint(1, max_assertions)
    n_other = rng.randint(0, max_statements - n_assert)
    kinds = ["a"] * n_assert + ["s"] * n_other
    rng.shuffle(kinds)
    # the last statement is a top-level assertion so nothing trails it
    if kinds[-1] != "a":
        i = len(kinds) - 1 - kinds[::-1].index("a")
        kinds[i], kinds[-1] = kinds[-1], kinds[i]
    raw: list[str] = []
    atoms: list[TruthAtom] = []
    for kind in kinds:
        if kind == "a":
            text, new = gen.assertion()
        elif rng.random() < 0.05 and gen.declared:
            text, new = gen.assertion(nested=True)
        else:
            text, new = gen.simple()
        raw.append(text)
        atoms.extend(new)
    name = f"testSynthetic{seed}"
    body = "\n".join(f"        {s}" for s in raw)
    source = (
        f"public class Synthetic{seed}Test {{\n"
        f"    @Test\n"
        f"    public void {name}() {{\n{body}\n    }}\n}}\n"
    )
    return SyntheticTest(name, source, raw, atoms)


# -- realistic corpus --------------------------------------------------------------

_SCENARIOS = []


def _scenario(fn):
    _SCENARIOS.append(fn)
    return fn


@_scenario
def _list_ops(rng: random.Random, n: int) -> str:
    k = rng.randint(1, 5)
    return f"""\
    @Test
    public void testListOperations{n}() {{
        List<String> items = new ArrayList<>();
        items.add("a{k}");
        items.add("b{k}");
        assertEquals(2, items.size());
        // removal shrinks the list
        items.remove(0);
        assertEquals(1, items.size());
        assertEquals("b{k}", items.get(0));
    }}
"""


@_scenario
def _builder(rng: random.Random, n: int) -> str:
    word = rng.choice(["alpha", "beta", "gamma", "delta"])
    return f"""\
    @Test
    public void testBuilderAppends{n}() {{
        StringBuilder sb = new StringBuilder();
        sb.append("{word}");
        String prefix = "{word[:2]}";
        sb.append('-').append({rng.randint(0, 99)});
        assertTrue(sb.toString().startsWith(prefix));
        assertFalse(sb.length() == 0);
    }}
"""


@_scenario
def _exception(rng: random.Random, n: int) -> str:
    idx = rng.randint(5, 20)
    return f"""\
    @Test
    void testGetOutOfRange{n}() {{
        int[] values = {{1, 2, 3}};
        Container c = new Container(values);
        assertEquals(3, c.size());
        assertThrows(IndexOutOfBoundsException.class, () -> c.get({idx}));
    }}
"""


@_scenario
def _map(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    public void testMapPutAndGet{n}() {{
        Map<String, Integer> counts = new HashMap<>();
        String key = "k{n}";
        counts.put(key, {rng.randint(1, 9)});
        Integer missing = counts.get("absent");
        assertNull(missing);
        assertTrue(counts.containsKey(key));
        counts.clear();
        assertTrue(counts.isEmpty());
    }}
"""


@_scenario
def _loop(rng: random.Random, n: int) -> str:
    limit = rng.randint(2, 10)
    return f"""\
    @Test
    public void testAccumulate{n}() {{
        int total = 0, count = 0;
        for (int i = 0; i < {limit}; i++) {{
            total += i;
            count++;
        }}
        int expected = {limit * (limit - 1) // 2};
        assertEquals(expected, total);
        assertEquals({limit}, count);
    }}
"""


@_scenario
def _chain(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    public void testChainedAssignment{n}() {{
        int a, b;
        a = b = {rng.randint(1, 9)};
        Point p = new Point(a, b);
        assertEquals(a, p.getX());
        assertEquals(b, p.getY());
    }}
"""


@_scenario
def _try_catch(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    public void testParseInvalid{n}() {{
        Parser parser = new Parser();
        parser.setStrict(true);
        try {{
            parser.parse("<{n}");
            fail("expected ParseException");
        }} catch (ParseException e) {{
            assertNotNull(e.getMessage());
        }}
        assertTrue(parser.isStrict());
    }}
"""


@_scenario
def _matrix(rng: random.Random, n: int) -> str:
    col = rng.randint(0, 3)
    return f"""\
    public void testGetColumnMatrix{n}() {{
        RealMatrix m = new RealMatrixImpl(subTestData);
        RealMatrix mColumn{col} = new RealMatrixImpl(subColumn{col});
        assertEquals("Column{col}", mColumn{col}, m.getColumnMatrix({col}));
        assertThrows(MatrixIndexException.class, () -> m.getColumnMatrix({col + 5}));
    }}
"""


@_scenario
def _mockito(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    public void testServiceDelegates{n}() {{
        Repository repo = mock(Repository.class);
        when(repo.find({n})).thenReturn(new Entity({n}));
        Service service = new Service(repo);
        Entity found = service.lookup({n});
        assertEquals({n}, found.getId());
        verify(repo).find({n});
    }}
"""


@_scenario
def _no_assert(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    public void testSmoke{n}() {{
        Engine engine = new Engine();
        engine.start();
        engine.stop();
    }}
"""


@_scenario
def _parameterized(rng: random.Random, n: int) -> str:
    return f"""\
    @ParameterizedTest
    @ValueSource(ints = {{1, 2, {rng.randint(3, 9)}}})
    void testPositive{n}(int value) {{
        Counter counter = new Counter();
        counter.increment(value);
        assertTrue(counter.get() > 0);
        assertEquals(value, counter.get(), "counter mismatch");
    }}
"""


@_scenario
def _strings(rng: random.Random, n: int) -> str:
    s = rng.choice(["Hello", "World", "Java", "Refine"])
    return f"""\
    @Test
    public void testStringUtilities{n}() {{
        String text = "{s}";
        String upper = text.toUpperCase();
        String lower = text.toLowerCase();
        /* both transforms keep the length */
        assertEquals(text.length(), upper.length());
        assertEquals("{s.lower()}", lower);
        assertNotEquals(upper, lower);
    }}
"""


@_scenario
def _arrays(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    public void testArraySwap{n}() {{
        int[] data = new int[4];
        data[0] = {rng.randint(1, 9)};
        data[1] = data[0] * 2;
        int tmp = data[0];
        data[0] = data[1];
        data[1] = tmp;
        assertEquals(tmp, data[1]);
        assertArrayEquals(new int[]{{data[0], tmp, 0, 0}}, data);
    }}
"""


@_scenario
def _assert_all(rng: random.Random, n: int) -> str:
    return f"""\
    @Test
    void testPersonFields{n}() {{
        Person person = new Person("Ada", {rng.randint(20, 60)});
        Address address = new Address("Main St");
        person.setAddress(address);
        assertAll(
            () -> assertEquals("Ada", person.getName()),
            () -> assertNotNull(person.getAddress()));
        assertSame(address, person.getAddress());
    }}
"""


def realistic_class(index: int, seed: int = 0, tests_per_class: int = 6) -> str:
    """Source of one JUnit class with ``tests_per_class`` scenario tests and helpers."""
    rng = random.Random(seed * 100_003 + index)
    methods = []
    for j in range(tests_per_class):
        scenario = rng.choice(_SCENARIOS)
        methods.append(scenario(rng, index * tests_per_class + j))
    body = "\n".join(methods)
    return f"""\
package org.example.gen{index % 7};

import static org.junit.jupiter.api.Assertions.*;

import java.util.*;
import org.junit.jupiter.api.BeforeEach;
import org.junit.jupiter.api.Test;

/** Generated fixture class {index}. */
public class Generated{index}Test {{

    private double[][] subTestData = {{{{1, 2}}, {{3, 4}}}};
    private int seed = {index};

    @BeforeEach
    public void setUp() {{
        seed = seed + 1;
    }}

{body}
    private static void log(Object o) {{
    }}
}}
"""


def write_corpus(out_dir: str | Path, n_classes: int = 90, seed: int = 0,
                 tests_per_class: int = 6) -> list[Path]:
    out = Path(out_dir)
    paths = []
    for i in range(n_classes):
        path = out / f"gen{i % 7}" / f"Generated{i}Test.java"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(realistic_class(i, seed, tests_per_class), encoding="utf-8")
        paths.append(path)
    return paths
