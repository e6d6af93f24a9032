"""One-shot prompting for comments and identifiers over a chat-completion API.

Providers take a :class:`ChatRequest` and return a :class:`ChatResponse`.
:class:`HttpProvider` speaks chat-completion JSON over HTTPS;
:class:`MockProvider` serves canned responses from a fixtures directory
(one ``<request-hash>.txt`` per request) and otherwise synthesises a
deterministic answer, so offline runs are reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .java_ast import declared_locals, find_methods, line_indent, parse_source, statement_children

logger = logging.getLogger(__name__)

TEMPLATE_VERSION = "1.0"


class ProviderError(RuntimeError):
    pass


class ProviderUnreachable(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class EmptyResponse(ProviderError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    endpoint: str = "https://api.deepseek.com/chat/completions"
    model: str = "deepseek-chat"
    credential_env: str = "DEEPSEEK_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    timeout_s: float = 120.0
    max_concurrent: int = 4

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")


@dataclass(frozen=True)
class PromptTemplate:
    task: str  # "comments" or "identifiers"
    instruction: str
    example_input: str
    example_output: str

    def render(self, test_source: str, class_name: str = "", extra: str = "") -> tuple[str, str]:
        """(system, user) message pair."""
        user = (
            "### Example\n"
            f"Input:\n```java\n{self.example_input}\n```\n"
            f"Output:\n```\n{self.example_output}\n```\n\n"
            "### Task\n"
        )
        if class_name:
            user += f"Test class: {class_name}\n"
        user += f"Input:\n```java\n{test_source}\n```\n"
        if extra:
            user += f"\n{extra}\n"
        user += "Output:\n"
        return self.instruction, user


_EXAMPLE_TEST = """\
@Test
public void testPush() {
    Stack<Integer> s = new Stack<>();
    s.push(7);
    assertEquals(7, (int) s.peek());
}"""

COMMENT_TEMPLATE = PromptTemplate(
    task="comments",
    instruction=(
        "You improve the readability of Java unit tests. Rewrite the given test "
        "adding a Javadoc comment that states the scenario under test and inline "
        "comments that follow the Arrange-Act-Assert pattern. Do not change, add, "
        "remove or reorder any statement. Answer with the complete test method only."
    ),
    example_input=_EXAMPLE_TEST,
    example_output="""\
/**
 * Pushing an element makes it the top of the stack.
 */
@Test
public void testPush() {
    // Arrange: create an empty stack
    Stack<Integer> s = new Stack<>();
    // Act: push a single element
    s.push(7);
    // Assert: the pushed element is on top
    assertEquals(7, (int) s.peek());
}""",
)

IDENTIFIER_TEMPLATE = PromptTemplate(
    task="identifiers",
    instruction=(
        "You suggest descriptive names for the local variables and the method name "
        "of a Java unit test. Every new name must be a valid Java identifier and "
        "all new names must be distinct. Answer with one `old -> new` line per "
        "identifier and nothing else."
    ),
    example_input=_EXAMPLE_TEST,
    example_output="""\
testPush -> testPushPlacesElementOnTop
s -> emptyStack""",
)

DUPLICATE_INSTRUCTION = (
    "Your previous answer gave the same new name to different identifiers ({names}). "
    "Give every identifier a distinct new name."
)


@dataclass(frozen=True)
class ChatRequest:
    task: str
    system: str
    user: str
    model: str
    temperature: float
    subject: str = field(default="", compare=False)  # test source, for the mock

    def payload(self) -> dict:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": self.system},
                {"role": "user", "content": self.user},
            ],
        }

    def digest(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass(frozen=True)
class LlmExchange:
    task: str
    request: str
    response: str
    latency_s: float
    prompt_tokens: int
    completion_tokens: int
    provider: str
    request_hash: str = ""


class Provider(Protocol):
    name: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


class HttpProvider:
    """Chat-completion JSON over HTTP(S); credential read from the environment."""

    name = "http"

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.credential_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._client.post(self.config.endpoint, json=request.payload(), headers=headers)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.TransportError as exc:
            raise ProviderUnreachable(str(exc)) from exc
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise EmptyResponse(f"malformed completion: {exc}") from exc
        if not text.strip():
            raise EmptyResponse("provider returned empty content")
        usage = body.get("usage") or {}
        return ChatResponse(text, int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0)))


def _count_tokens(text: str) -> int:
    return len(text.split())


class MockProvider:
    """Offline provider: canned ``<hash>.txt`` fixtures, else a deterministic echo."""

    name = "mock"

    def __init__(self, fixtures_dir: str | Path | None = None):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None

    def fixture_path(self, request: ChatRequest) -> Path | None:
        if self.fixtures_dir is None:
            return None
        return self.fixtures_dir / f"{request.digest()}.txt"

    def complete(self, request: ChatRequest) -> ChatResponse:
        path = self.fixture_path(request)
        if path is not None and path.exists():
            text = path.read_text(encoding="utf-8")
        elif request.task == "comments":
            text = mock_comment_response(request.subject)
        else:
            text = mock_identifier_response(request.subject)
        return ChatResponse(text, _count_tokens(request.system + request.user), _count_tokens(text))


def mock_comment_response(source: str) -> str:
    """The test echoed back with a fixed docstring and one Arrange comment."""
    tree = parse_source(source)
    methods = find_methods(tree)
    if not methods or methods[0].child("body") is None:
        return "/** Refined test. */\n" + source
    data = tree.source_bytes
    stmts = statement_children(methods[0].child("body"))
    inserts: list[tuple[int, str]] = []
    if stmts:
        inserts.append((stmts[0].start, "// Arrange"))
    out = data
    for offset, comment in sorted(inserts, reverse=True):
        indent = line_indent(out, offset)
        out = out[:offset] + f"{comment}\n{indent}".encode() + out[offset:]
    decl = methods[0].start
    indent = line_indent(data, decl)
    out = out[:decl] + f"/** Refined test. */\n{indent}".encode() + out[decl:]
    return out.decode("utf-8")


def mock_identifier_response(source: str) -> str:
    """``old -> new`` lines: locals get a ``Value`` suffix, the test name a scenario suffix."""
    tree = parse_source(source)
    methods = find_methods(tree)
    if not methods:
        return ""
    method = methods[0]
    lines = []
    name = method.child("name").text
    m = re.fullmatch(r"(.*)_(\d+)", name)
    new_name = f"{m.group(1)}Case{m.group(2)}" if m else f"{name}Refined"
    lines.append(f"{name} -> {new_name}")
    lines.extend(f"{local} -> {local}Value" for local in declared_locals(method))
    return "\n".join(lines)


_PAIR_RE = re.compile(
    r"^\s*[-*]?\s*`?([A-Za-z_$][\w$]*)`?\s*(?:->|→|=>|:|=)\s*`?([A-Za-z_$][\w$]*)`?\s*[,;]?\s*$"
)


def parse_mapping_pairs(raw: str) -> list[tuple[str, str]]:
    """``old -> new`` pairs from model output; accepts arrows, colons and a JSON object."""
    text = raw.strip()
    fence = re.search(r"```(?:\w+)?\n(.*?)```", text, re.S)
    if fence:
        text = fence.group(1)
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
            return [(str(k), str(v)) for k, v in obj.items()]
        except (ValueError, AttributeError):
            pass
    pairs = []
    for line in text.splitlines():
        for part in re.split(r"[;,](?=\s*[A-Za-z_$][\w$]*\s*(?:->|→|=>))", line):
            m = _PAIR_RE.match(part)
            if m:
                pairs.append((m.group(1), m.group(2)))
    return pairs


def duplicate_targets(pairs: list[tuple[str, str]]) -> list[str]:
    seen: dict[str, str] = {}
    dups = []
    for old, new in pairs:
        if new in seen and seen[new] != old and new not in dups:
            dups.append(new)
        seen.setdefault(new, old)
    return dups


class LlmGateway:
    """Shared front door to a provider: concurrency limit plus audit log."""

    def __init__(self, provider: Provider, config: ProviderConfig = ProviderConfig(),
                 audit_path: str | Path | None = None):
        self.provider = provider
        self.config = config
        self.audit_path = Path(audit_path) if audit_path else None
        self._slots = threading.BoundedSemaphore(config.max_concurrent)
        self._lock = threading.Lock()
        self._exchanges: list[LlmExchange] = []

    @property
    def exchanges(self) -> list[LlmExchange]:
        with self._lock:
            return list(self._exchanges)

    def request(self, task: str, template: PromptTemplate, test_source: str,
                class_name: str = "", extra: str = "") -> ChatRequest:
        system, user = template.render(test_source, class_name, extra)
        return ChatRequest(task, system, user, self.config.model, self.config.temperature, test_source)

    def complete(self, request: ChatRequest) -> tuple[str, LlmExchange]:
        start = time.perf_counter()
        error: ProviderError | None = None
        with self._slots:
            try:
                response = self.provider.complete(request)
            except ProviderError as exc:
                error, response = exc, ChatResponse("")
        if error is None and not response.text.strip():
            error = EmptyResponse("provider returned empty content")
        exchange = LlmExchange(
            task=request.task,
            request=request.user,
            response=response.text if error is None else f"<error: {type(error).__name__}: {error}>",
            latency_s=time.perf_counter() - start,
            prompt_tokens=response.prompt_tokens,
            completion_tokens=response.completion_tokens,
            provider=getattr(self.provider, "name", type(self.provider).__name__),
            request_hash=request.digest(),
        )
        self._record(exchange)
        if error is not None:
            raise error
        return response.text, exchange

    def _record(self, exchange: LlmExchange) -> None:
        with self._lock:
            self._exchanges.append(exchange)
            if self.audit_path is not None:
                with self.audit_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(exchange), ensure_ascii=False) + "\n")


def _focal(focal_context: str) -> str:
    return f"Code under test:\n```java\n{focal_context}\n```" if focal_context else ""


def generate_comments(test_source: str, gateway: LlmGateway, class_name: str = "",
                      focal_context: str = "") -> tuple[str, LlmExchange]:
    """The model's annotated rewrite of the test, verbatim."""
    request = gateway.request("comments", COMMENT_TEMPLATE, test_source, class_name,
                              _focal(focal_context))
    return gateway.complete(request)


@dataclass
class IdentifierResult:
    raw: str
    exchanges: list[LlmExchange]
    retries: int = 0
    retries_exhausted: bool = False


def generate_identifiers(
    test_source: str,
    gateway: LlmGateway,
    class_name: str = "",
    find_duplicates: Callable[[str], list[str]] | None = None,
    focal_context: str = "",
) -> IdentifierResult:
    """Request an identifier mapping, re-asking while new names collide.

    ``find_duplicates`` maps raw output to the duplicated new names; it
    defaults to a plain parse of the ``old -> new`` lines.
    """
    find_duplicates = find_duplicates or (lambda raw: duplicate_targets(parse_mapping_pairs(raw)))
    focal = _focal(focal_context)
    request = gateway.request("identifiers", IDENTIFIER_TEMPLATE, test_source, class_name, focal)
    raw, exchange = gateway.complete(request)
    result = IdentifierResult(raw, [exchange])
    dups = find_duplicates(raw)
    while dups and result.retries < gateway.config.max_retries:
        extra = "\n\n".join(x for x in (focal, DUPLICATE_INSTRUCTION.format(names=", ".join(dups))) if x)
        request = gateway.request("identifiers", IDENTIFIER_TEMPLATE, test_source, class_name, extra)
        raw, exchange = gateway.complete(request)
        result.raw = raw
        result.exchanges.append(exchange)
        result.retries += 1
        dups = find_duplicates(raw)
    result.retries_exhausted = bool(dups)
    return result
