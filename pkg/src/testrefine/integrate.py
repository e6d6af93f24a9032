"""Ground LLM suggestions back into purified tests.

Comments are lifted out of the model's rewrite and re-anchored on the
original statements by node distance; identifier suggestions become a
validated injective mapping applied to the original source from the last
occurrence backwards. Every emitted test is checked to be token-identical
to its purified source once comments are stripped and renames inverted.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

from .java_ast import (
    STATEMENT_KINDS,
    AstNode,
    Token,
    find_methods,
    declared_locals,
    is_valid_identifier,
    line_indent,
    parse_source,
    starts_line,
    token_stream,
    _is_name_identifier,
)
from .llm_gateway import (
    LlmExchange,
    LlmGateway,
    ProviderError,
    duplicate_targets,
    generate_comments,
    generate_identifiers,
    parse_mapping_pairs,
)
from .purify import Origin, PurifiedTest
from .similarity import DEFAULT_CONFIG, CodeBleuConfig, node_distance

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.7

FALLBACK_NONE = 0
FALLBACK_COMMENTS_ONLY = 1
FALLBACK_PURIFIED = 2


class ReparseFailure(ValueError):
    pass


@dataclass(frozen=True)
class InlineComment:
    text: str
    context: AstNode


@dataclass(frozen=True)
class DroppedComment:
    text: str
    reason: str


@dataclass(frozen=True)
class ExtractedComments:
    blocks: tuple[str, ...] = ()
    inlines: tuple[InlineComment, ...] = ()
    orphans: tuple[str, ...] = ()  # inline comments with no right sibling

    def __iter__(self):
        yield self.blocks
        yield self.inlines


@dataclass(frozen=True)
class CommentPlan:
    block_comments: tuple[str, ...] = ()
    placements: tuple[tuple[InlineComment, AstNode], ...] = ()
    dropped: tuple[DroppedComment, ...] = ()


@dataclass(frozen=True)
class IdentifierMapping:
    entries: tuple[tuple[str, str], ...] = ()
    test_name: tuple[str, str] | None = None

    def __len__(self) -> int:
        return len(self.entries) + (self.test_name is not None)

    def forward(self) -> dict[str, str]:
        return dict(self.entries)

    def inverse(self) -> dict[str, str]:
        inv = {new: old for old, new in self.entries}
        if self.test_name is not None:
            inv[self.test_name[1]] = self.test_name[0]
        return inv

    def inverted(self) -> "IdentifierMapping":
        tn = (self.test_name[1], self.test_name[0]) if self.test_name else None
        return IdentifierMapping(tuple((n, o) for o, n in self.entries), tn)


@dataclass(frozen=True)
class MappingResult:
    mapping: IdentifierMapping
    duplicates: bool
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True)
class RefinedTest:
    source: str
    name: str
    origin: Origin
    purified_source: str
    mapping: IdentifierMapping
    preservation_verified: bool
    fallback_level: int = FALLBACK_NONE
    comments_placed: int = 0
    comments_dropped: int = 0
    identifiers_renamed: int = 0
    diagnostics: tuple[str, ...] = ()
    exchanges: tuple[LlmExchange, ...] = field(default=(), repr=False)


# -- comments ------------------------------------------------------------------

_FENCE_RE = re.compile(r"```[ \t]*(?:java|Java)?[ \t]*\n(.*?)```", re.S)


def strip_fences(text: str) -> str:
    m = _FENCE_RE.search(text)
    return m.group(1) if m else text


def comment_text(raw: str) -> str:
    """Comment content without ``//``, ``/* */`` markers or leading ``*``."""
    if raw.startswith("//"):
        return raw[2:].strip()
    body = raw[2:-2] if raw.startswith("/*") and raw.endswith("*/") else raw
    if body.startswith("*"):
        body = body[1:]
    lines = [re.sub(r"^\s*\*?\s?", "", ln).rstrip() for ln in body.splitlines()]
    while lines and not lines[0]:
        lines.pop(0)
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines).strip()


def _blocks_with_statements(node: AstNode):
    for n in node.walk():
        if n.kind in ("block", "switch_block_statement_group", "constructor_body"):
            yield n


def extract_comments(llm_output: str) -> ExtractedComments:
    """Block comments above the method, and inline comments with their right sibling."""
    tree = parse_source(strip_fences(llm_output))
    methods = find_methods(tree)
    if methods:
        method = methods[0]
        blocks = _leading_comments(method, tree.root)
        scope = method.child("body")
    else:
        blocks = []
        scope = tree.root
    inlines: list[InlineComment] = []
    orphans: list[str] = []
    if scope is None:
        return ExtractedComments(tuple(blocks))
    containers = list(_blocks_with_statements(scope)) if methods else [scope]
    for container in containers:
        kids = [c for c in container.children if c.named]
        run: list[str] = []
        for c in kids:
            if c.is_comment:
                text = comment_text(c.text)
                if text:
                    run.append(text)
                continue
            if run:
                if c.kind in STATEMENT_KINDS and c.kind != "block":
                    inlines.append(InlineComment("\n".join(run), c))
                else:
                    orphans.append("\n".join(run))
                run = []
        if run:
            orphans.append("\n".join(run))
    inlines.sort(key=lambda ic: ic.context.start)
    return ExtractedComments(tuple(blocks), tuple(inlines), tuple(orphans))


def _leading_comments(method: AstNode, root: AstNode) -> list[str]:
    """Comments directly above the method declaration (or inside its modifiers)."""
    out = []
    modifiers = next((c for c in method.children if c.kind == "modifiers"), None)
    if modifiers is not None:
        out.extend(comment_text(c.text) for c in modifiers.children if c.is_comment)
    run = []
    for c in reversed(_siblings_before(method, root)):
        if not c.is_comment:
            break
        run.append(comment_text(c.text))
    return [t for t in [*reversed(run), *out] if t]


def _siblings_before(node: AstNode, root: AstNode) -> list[AstNode]:
    for n in root.walk():
        for i, c in enumerate(n.children):
            if c is node:
                return list(n.children[:i])
    return []


def candidate_statements(original: PurifiedTest | str) -> list[AstNode]:
    """Statement nodes of the original test body, pre-order (nested ones included)."""
    source = original.render() if isinstance(original, PurifiedTest) else original
    tree = parse_source(source)
    methods = find_methods(tree)
    scope = methods[0].child("body") if methods else tree.root
    if scope is None:
        return []
    return [n for n in scope.walk()
            if n is not scope and n.kind in STATEMENT_KINDS and n.kind != "block"]


def match_comment_anchor(
    comment: InlineComment,
    candidates: Sequence[AstNode],
    config: CodeBleuConfig = DEFAULT_CONFIG,
    threshold: float = DEFAULT_THRESHOLD,
    taken: frozenset[int] | set[int] = frozenset(),
) -> AstNode | None:
    """First candidate, in source order, whose distance to the context exceeds ``threshold``.

    ``taken`` holds start offsets of statements already claimed by earlier comments.
    """
    for stmt in candidates:
        if stmt.start in taken:
            continue
        if node_distance(stmt, comment.context, config) > threshold:
            return stmt
    return None


def build_comment_plan(
    extracted: ExtractedComments,
    original: PurifiedTest | str,
    config: CodeBleuConfig = DEFAULT_CONFIG,
    threshold: float = DEFAULT_THRESHOLD,
) -> CommentPlan:
    candidates = candidate_statements(original)
    taken: set[int] = set()
    placements = []
    dropped = [DroppedComment(t, "no context") for t in extracted.orphans]
    for comment in extracted.inlines:
        anchor = match_comment_anchor(comment, candidates, config, threshold, taken)
        if anchor is None:
            dropped.append(DroppedComment(comment.text, "below threshold"))
        else:
            taken.add(anchor.start)
            placements.append((comment, anchor))
    return CommentPlan(extracted.blocks, tuple(placements), tuple(dropped))


def _safe(text: str) -> str:
    return text.replace("*/", "* /")


def apply_comment_plan(source: str, plan: CommentPlan) -> str:
    """Insert planned comments into ``source`` (the rendered purified test)."""
    data = source.encode("utf-8")
    inserts: list[tuple[int, bytes]] = []
    for comment, anchor in plan.placements:
        if starts_line(data, anchor.start):
            indent = line_indent(data, anchor.start)
            lines = "".join(f"// {ln}\n{indent}" if ln else f"//\n{indent}"
                            for ln in comment.text.splitlines())
            inserts.append((anchor.start, lines.encode("utf-8")))
        else:
            flat = " ".join(comment.text.split())
            inserts.append((anchor.start, f"/* {_safe(flat)} */ ".encode("utf-8")))
    if plan.block_comments:
        methods = find_methods(parse_source(source))
        if methods:
            start = methods[0].start
            # first line of a rendered method carries no indent; the closing brace does
            indent = line_indent(data, start) or line_indent(data, methods[0].end - 1)
            body = [ln for text in plan.block_comments for ln in _safe(text).splitlines()]
            doc = "/**\n" + "".join(f"{indent} * {ln}".rstrip() + "\n" for ln in body) + f"{indent} */\n{indent}"
            inserts.append((start, doc.encode("utf-8")))
    # stable for equal offsets: doc comment goes above inline comments
    for offset, payload in sorted(inserts, key=lambda p: p[0], reverse=True):
        data = data[:offset] + payload + data[offset:]
    return data.decode("utf-8")


# -- identifiers ---------------------------------------------------------------

def _method_of(source: str) -> AstNode | None:
    methods = find_methods(parse_source(source))
    return methods[0] if methods else None


def _all_identifier_texts(node: AstNode) -> set[str]:
    return {n.text for n in node.walk() if n.kind in ("identifier", "type_identifier")}


def extract_identifier_mapping(
    llm_output: str,
    original: PurifiedTest | str,
    source_test_name: str | None = None,
) -> MappingResult:
    """Validated ``old -> new`` mapping plus a flag for duplicated new names."""
    source = original.render() if isinstance(original, PurifiedTest) else original
    diagnostics: list[str] = []
    pairs = parse_mapping_pairs(llm_output)
    if not pairs:
        if llm_output.strip():
            diagnostics.append("unparseable identifier response")
        return MappingResult(IdentifierMapping(), False, tuple(diagnostics))
    method = _method_of(source)
    if method is None:
        return MappingResult(IdentifierMapping(), False, ("original has no method",))
    test_name = method.child("name").text
    test_aliases = {test_name}
    if source_test_name:
        test_aliases.add(source_test_name)
    locals_ = set(declared_locals(method))
    duplicates = bool(duplicate_targets(pairs))

    entries: list[tuple[str, str]] = []
    test_pair: tuple[str, str] | None = None
    used_new: set[str] = set()
    mapped_old: set[str] = set()
    for old, new in pairs:
        if old == new:
            continue
        if not is_valid_identifier(new):
            diagnostics.append(f"invalid identifier {new!r} for {old!r}")
            continue
        if new in used_new:
            diagnostics.append(f"duplicate new name {new!r} for {old!r} dropped")
            continue
        if old in test_aliases:
            if test_pair is None:
                test_pair = (test_name, new)
                used_new.add(new)
            continue
        if old not in locals_:
            diagnostics.append(f"{old!r} is not a declared local; dropped")
            continue
        if old in mapped_old:
            continue
        entries.append((old, new))
        used_new.add(new)
        mapped_old.add(old)

    renamed = {o for o, _ in entries} | ({test_name} if test_pair else set())
    retained = _all_identifier_texts(method) - renamed
    clean = []
    for old, new in entries:
        if new in retained:
            diagnostics.append(f"{new!r} collides with an existing name; {old!r} kept")
        else:
            clean.append((old, new))
    if test_pair is not None and test_pair[1] in retained:
        diagnostics.append(f"test name {test_pair[1]!r} collides with an existing name")
        test_pair = None
    return MappingResult(IdentifierMapping(tuple(clean), test_pair), duplicates, tuple(diagnostics))


def _rename_sites(method: AstNode, names: dict[str, str]) -> list[AstNode]:
    sites = []
    body = method.child("body")
    if body is None:
        return sites

    def rec(n: AstNode, parent: AstNode | None) -> None:
        if n.kind == "identifier":
            if n.text in names and parent is not None and _is_name_identifier(n, parent) and not (
                parent.kind == "field_access" and n.field_name == "field"
            ):
                sites.append(n)
            return
        for c in n.children:
            rec(c, n)

    rec(body, method)
    return sites


def apply_renames(source: str, mapping: IdentifierMapping) -> str:
    """Replace every variable occurrence of mapped names, last occurrence first."""
    names = mapping.forward()
    if not names:
        return source
    tree = parse_source(source)
    methods = find_methods(tree)
    if not methods:
        return source
    data = tree.source_bytes
    sites = sorted(_rename_sites(methods[0], names), key=lambda n: n.start, reverse=True)
    for n in sites:
        data = data[:n.start] + names[n.text].encode("utf-8") + data[n.end:]
    renamed = data.decode("utf-8")
    if parse_source(renamed).parse_errors and not tree.parse_errors:
        raise ReparseFailure("renamed test no longer parses")
    return renamed


def unique_name(name: str, taken: Sequence[str] | set[str]) -> str:
    if name not in taken:
        return name
    k = 1
    while f"{name}_{k}" in taken:
        k += 1
    return f"{name}_{k}"


def rename_test_method(source: str, new_name: str, sibling_names: Sequence[str] | set[str] = ()) -> str:
    """Change only the method's declared name; collisions get ``_1``, ``_2``... suffixes."""
    method = _method_of(source)
    if method is None:
        return source
    name_node = method.child("name")
    if name_node.text == new_name:
        return source
    final = unique_name(new_name, set(sibling_names) - {name_node.text})
    data = method.source
    return (data[:name_node.start] + final.encode("utf-8") + data[name_node.end:]).decode("utf-8")


# -- verification --------------------------------------------------------------

def _normalised_tokens(source: str, inverse: dict[str, str] | None = None) -> list[Token] | None:
    tree = parse_source(source)
    if tree.parse_errors:
        return None
    tokens = token_stream(tree.root, strip_comments=True)
    if inverse:
        tokens = [Token(t.kind, inverse.get(t.text, t.text)) if t.is_identifier else t for t in tokens]
    return tokens


def verify_preservation(
    purified: PurifiedTest | str,
    refined: RefinedTest | str,
    mapping: IdentifierMapping = IdentifierMapping(),
) -> bool:
    """True iff the refined test equals the purified one modulo comments and renames."""
    purified_src = purified.render() if isinstance(purified, PurifiedTest) else purified
    refined_src = refined.source if isinstance(refined, RefinedTest) else refined
    expected = _normalised_tokens(purified_src)
    actual = _normalised_tokens(refined_src, mapping.inverse())
    return expected is not None and actual is not None and expected == actual


# -- per-test orchestration ----------------------------------------------------

def refine_test(
    purified: PurifiedTest,
    gateway: LlmGateway,
    config: CodeBleuConfig = DEFAULT_CONFIG,
    threshold: float = DEFAULT_THRESHOLD,
    sibling_names: Sequence[str] | set[str] = (),
) -> RefinedTest:
    """Comment, rename and verify one purified test, falling back when needed.

    Fallback ladder: full refinement, then comments only, then the purified
    test verbatim. The returned test always passes preservation.
    """
    purified_src = purified.render()
    class_name = purified.method.class_name
    diagnostics: list[str] = []
    exchanges: list[LlmExchange] = []

    plan = CommentPlan()
    try:
        annotated, exchange = generate_comments(purified_src, gateway, class_name)
        exchanges.append(exchange)
        plan = build_comment_plan(extract_comments(annotated), purified_src, config, threshold)
        if not plan.placements and not plan.block_comments:
            diagnostics.append("no extractable comments")
    except ProviderError as exc:
        diagnostics.append(f"comment generation failed: {type(exc).__name__}: {exc}")
    commented = apply_comment_plan(purified_src, plan)

    mapping = IdentifierMapping()
    try:
        result = generate_identifiers(
            purified_src, gateway, class_name,
            find_duplicates=lambda raw: ["dup"] if extract_identifier_mapping(
                raw, purified_src, purified.origin.test_name).duplicates else [],
        )
        exchanges.extend(result.exchanges)
        if result.retries_exhausted:
            diagnostics.append("duplicate identifiers persisted after retries; duplicates dropped")
        extracted = extract_identifier_mapping(result.raw, purified_src, purified.origin.test_name)
        diagnostics.extend(extracted.diagnostics)
        mapping = extracted.mapping
    except ProviderError as exc:
        diagnostics.append(f"identifier generation failed: {type(exc).__name__}: {exc}")

    stats = dict(
        comments_placed=len(plan.placements),
        comments_dropped=len(plan.dropped),
    )

    refined_src, name = commented, purified.name
    level = FALLBACK_NONE
    try:
        refined_src = apply_renames(commented, mapping)
        if mapping.test_name is not None:
            final = unique_name(mapping.test_name[1], set(sibling_names) - {purified.name})
            mapping = IdentifierMapping(mapping.entries, (purified.name, final))
            refined_src = rename_test_method(refined_src, final)
            name = final
    except ReparseFailure as exc:
        diagnostics.append(f"rename aborted: {exc}")
        mapping, refined_src, level = IdentifierMapping(), commented, FALLBACK_COMMENTS_ONLY

    if not verify_preservation(purified_src, refined_src, mapping):
        diagnostics.append("preservation check failed; falling back to comments only")
        mapping, refined_src, name, level = IdentifierMapping(), commented, purified.name, FALLBACK_COMMENTS_ONLY
        if not verify_preservation(purified_src, refined_src, mapping):
            diagnostics.append("comment insertion broke preservation; emitting purified test")
            refined_src, level = purified_src, FALLBACK_PURIFIED
            stats = dict(comments_placed=0, comments_dropped=len(plan.placements) + len(plan.dropped))

    return RefinedTest(
        source=refined_src,
        name=name,
        origin=purified.origin,
        purified_source=purified_src,
        mapping=mapping,
        preservation_verified=verify_preservation(purified_src, refined_src, mapping),
        fallback_level=level,
        identifiers_renamed=len(mapping),
        diagnostics=tuple(diagnostics),
        exchanges=tuple(exchanges),
        **stats,
    )
