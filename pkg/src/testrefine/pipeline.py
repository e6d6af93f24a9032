"""End-to-end refinement over Java source trees.

Discover test methods, purify them, refine every purified test through the
gateway, substitute the results into per-class output files and write a
JSON report. Offline runs with the same inputs and fixtures produce
byte-identical files; wall-clock data is confined to the report's
``timing`` field.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import shlex
import subprocess
import time
from importlib import resources
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .integrate import (
    DEFAULT_THRESHOLD,
    FALLBACK_PURIFIED,
    IdentifierMapping,
    RefinedTest,
    rename_test_method,
    unique_name,
    verify_preservation,
)
from .integrate import refine_test
from .java_ast import (
    DEFAULT_MODIFICATION_KEYWORDS,
    GRAMMAR_VERSION,
    AstNode,
    TestMethod,
    UnreadableInput,
    extract_test_methods,
    class_method_names,
    line_indent,
    parse_source,
)
from .llm_gateway import (
    TEMPLATE_VERSION,
    HttpProvider,
    LlmGateway,
    MockProvider,
    ProviderConfig,
)
from .purify import NoAssertions, UnpurifiableTest, purify
from .similarity import CodeBleuConfig

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = "1.0"
BUNDLE_SCHEMA_VERSION = "1.0"


class ConfigError(ValueError):
    exit_code = 2


class IoError(OSError):
    exit_code = 3


@dataclass
class RunConfig:
    inputs: list[Path]
    out_dir: Path
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    codebleu: CodeBleuConfig = field(default_factory=CodeBleuConfig)
    threshold: float = DEFAULT_THRESHOLD
    keywords: tuple[str, ...] = DEFAULT_MODIFICATION_KEYWORDS
    workers: int = 1
    offline: bool = False
    fixtures_dir: Path | None = None
    compile_cmd: str | None = None
    report_path: Path | None = None
    audit_path: Path | None = None
    export_examples: Path | None = None

    def __post_init__(self):
        self.inputs = [Path(p) for p in self.inputs]
        self.out_dir = Path(self.out_dir)
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @property
    def report_file(self) -> Path:
        return Path(self.report_path) if self.report_path else self.out_dir / "refinement-report.json"

    def snapshot(self) -> dict[str, Any]:
        provider = asdict(self.provider)
        return {
            "inputs": [p.as_posix() for p in self.inputs],
            "provider": provider,
            "codebleu": asdict(self.codebleu),
            "threshold": self.threshold,
            "keywords": list(self.keywords),
            "workers": self.workers,
            "offline": self.offline,
            "compile_cmd": self.compile_cmd,
        }


@dataclass
class _Unit:
    """One discovered test method and what became of it."""

    index: int
    file_index: int
    method: TestMethod
    status: str = "refined"
    refined: list[RefinedTest] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    purify_s: float = 0.0
    refine_s: float = 0.0


@dataclass
class _SourceFile:
    path: Path
    rel: Path
    text: str
    class_methods: dict[str, set[str]]


# -- discovery -----------------------------------------------------------------

def discover_sources(inputs: Sequence[Path]) -> list[tuple[Path, Path]]:
    """(path, path relative to its input root) for every ``.java`` file, sorted."""
    found: list[tuple[Path, Path]] = []
    for root in inputs:
        if not root.exists():
            raise IoError(f"input path does not exist: {root}")
        if root.is_file():
            found.append((root, Path(root.name)))
        else:
            found.extend((p, p.relative_to(root)) for p in sorted(root.rglob("*.java")) if p.is_file())
    return found


def _load(path: Path, rel: Path) -> tuple[_SourceFile, list[TestMethod]]:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    tree = parse_source(data)
    return _SourceFile(path, rel, tree.source_text, class_method_names(tree)), extract_test_methods(tree)


# -- per-test work -------------------------------------------------------------

_TRY_KINDS = frozenset({"try_statement", "try_with_resources_statement"})


def _process(unit: _Unit, gateway: LlmGateway, config: RunConfig, taken: set[str]) -> _Unit:
    method = unit.method
    if method.parse_error:
        unit.status = "skipped"
        unit.diagnostics.append(f"parse error inside test: {method.parse_error}")
        return unit
    if any(n.kind in _TRY_KINDS for stmt in method.body for n in stmt.walk()):
        unit.diagnostics.append("try block kept whole as a control structure")
    t0 = time.perf_counter()
    try:
        purified = purify(method, config.keywords)
    except (NoAssertions, UnpurifiableTest) as exc:
        unit.purify_s = time.perf_counter() - t0
        unit.status = "passthrough"
        unit.diagnostics.append(str(exc))
        return unit
    unit.purify_s = time.perf_counter() - t0
    t1 = time.perf_counter()
    for p in purified:
        unit.refined.append(refine_test(p, gateway, config.codebleu, config.threshold, taken))
    unit.refine_s = time.perf_counter() - t1
    return unit


def _dedupe_names(units: list[_Unit], class_methods: dict[tuple[int, str], set[str]]) -> None:
    """Make refined names unique per class, deterministically, in discovery order."""
    used: dict[tuple[int, str], set[str]] = {}
    for unit in units:
        key = (unit.file_index, unit.method.class_name)
        names = used.setdefault(key, set(class_methods.get(key, set())))
        names -= {unit.method.name}
        if unit.status != "refined":
            names.add(unit.method.name)
            continue
        for i, r in enumerate(unit.refined):
            if r.name in names:
                final = unique_name(r.name, names)
                source = rename_test_method(r.source, final)
                purified_name = r.mapping.test_name[0] if r.mapping.test_name else r.name
                mapping = IdentifierMapping(r.mapping.entries, (purified_name, final))
                ok = verify_preservation(r.purified_source, source, mapping)
                unit.refined[i] = replace(r, source=source, name=final, mapping=mapping,
                                          preservation_verified=ok)
            names.add(unit.refined[i].name)


def _replacement_start(src: _SourceFile, decl: AstNode, refined: list[RefinedTest]) -> int:
    """Start of the span to replace; swallows an existing Javadoc when we emit a new one."""
    if not any(r.source.lstrip().startswith("/**") for r in refined):
        return decl.start
    data = decl.source
    before = data[:decl.start].rstrip()
    if before.endswith(b"*/"):
        open_at = before.rfind(b"/**")
        if open_at != -1 and b"*/" not in before[open_at:-2]:
            return open_at
    return decl.start


def _render_file(src: _SourceFile, units: list[_Unit]) -> str:
    data = src.text.encode("utf-8")
    edits = []
    for unit in units:
        if unit.status != "refined":
            continue
        decl = unit.method.declaration_node
        indent = line_indent(data, decl.start)
        joined = f"\n\n{indent}".join(r.source for r in unit.refined)
        edits.append((_replacement_start(src, decl, unit.refined), decl.end, joined.encode("utf-8")))
    for start, end, payload in sorted(edits, reverse=True):
        data = data[:start] + payload + data[end:]
    return data.decode("utf-8")


# -- reporting -----------------------------------------------------------------

def _record(unit: _Unit, src: _SourceFile) -> dict[str, Any]:
    exchanges = [e for r in unit.refined for e in r.exchanges]
    refined = unit.refined
    return {
        "source_file": src.rel.as_posix(),
        "class_name": unit.method.class_name,
        "test_name": unit.method.name,
        "status": unit.status,
        "purified_count": len(refined),
        "comments_placed": sum(r.comments_placed for r in refined),
        "comments_dropped": sum(r.comments_dropped for r in refined),
        "identifiers_renamed": sum(r.identifiers_renamed for r in refined),
        "preservation": all(r.preservation_verified for r in refined),
        "fallback_level": max((r.fallback_level for r in refined), default=FALLBACK_PURIFIED
                              if unit.status != "refined" else 0),
        "llm_calls": len(exchanges),
        "llm_tokens": {
            "prompt": sum(e.prompt_tokens for e in exchanges),
            "completion": sum(e.completion_tokens for e in exchanges),
        },
        "diagnostics": [*unit.diagnostics, *(d for r in refined for d in r.diagnostics)],
        "refined": [
            {
                "name": r.name,
                "origin_assertions": list(r.origin.assertion_ordinals),
                "preservation_verified": r.preservation_verified,
                "fallback_level": r.fallback_level,
                "renames": {old: new for old, new in r.mapping.entries},
                "source": r.source,
            }
            for r in refined
        ],
    }


def _aggregate(records: list[dict[str, Any]]) -> dict[str, Any]:
    fallbacks = {"0": 0, "1": 0, "2": 0}
    for rec in records:
        for r in rec["refined"]:
            fallbacks[str(r["fallback_level"])] += 1
    return {
        "tests": len(records),
        "refined_tests": sum(rec["purified_count"] for rec in records),
        "passthrough": sum(rec["status"] == "passthrough" for rec in records),
        "skipped": sum(rec["status"] == "skipped" for rec in records),
        "comments_placed": sum(rec["comments_placed"] for rec in records),
        "comments_dropped": sum(rec["comments_dropped"] for rec in records),
        "identifiers_renamed": sum(rec["identifiers_renamed"] for rec in records),
        "preservation_failures": sum(
            not r["preservation_verified"] for rec in records for r in rec["refined"]),
        "fallbacks": fallbacks,
        "llm_calls": sum(rec["llm_calls"] for rec in records),
        "prompt_tokens": sum(rec["llm_tokens"]["prompt"] for rec in records),
        "completion_tokens": sum(rec["llm_tokens"]["completion"] for rec in records),
    }


# -- external hooks --------------------------------------------------------------

def compile_check(refined_file: str | Path, command_template: str, timeout_s: float = 300) -> dict[str, Any]:
    """Run ``command_template`` on a file; ``{file}`` is substituted, else the path is appended."""
    path = str(refined_file)
    if "{file}" in command_template:
        argv = shlex.split(command_template.replace("{file}", shlex.quote(path)))
    else:
        argv = shlex.split(command_template) + [path]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout_s)
    except FileNotFoundError:
        return {"file": path, "status": "command-not-found", "exit_code": None}
    except subprocess.TimeoutExpired:
        return {"file": path, "status": "timeout", "exit_code": None}
    return {"file": path, "status": "pass" if proc.returncode == 0 else "fail",
            "exit_code": proc.returncode}


def load_schema(name: str) -> dict[str, Any]:
    """A shipped JSON Schema: ``"report"`` or ``"bundle"``."""
    text = resources.files("testrefine").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def export_examples(report: dict[str, Any], out_path: str | Path) -> Path:
    """JSON bundle of refined tests per source test, for downstream prompt builders."""
    tests = []
    for rec in report.get("records", []):
        if not rec["refined"]:
            continue
        tests.append({
            "source_file": rec["source_file"],
            "class_name": rec["class_name"],
            "test_name": rec["test_name"],
            "refined": [
                {
                    "name": r["name"],
                    "source": r["source"],
                    "origin_assertions": r["origin_assertions"],
                    "preservation_verified": r["preservation_verified"],
                }
                for r in rec["refined"]
            ],
        })
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({"tests": tests}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return out


# -- orchestration ---------------------------------------------------------------

def make_gateway(config: RunConfig) -> LlmGateway:
    provider = MockProvider(config.fixtures_dir) if config.offline else HttpProvider(config.provider)
    return LlmGateway(provider, config.provider, config.audit_path)


def run_pipeline(config: RunConfig, gateway: LlmGateway | None = None) -> dict[str, Any]:
    """Refine every discovered test; write output files and the report; return the report."""
    started = time.perf_counter()
    gateway = gateway or make_gateway(config)
    sources: list[_SourceFile] = []
    units: list[_Unit] = []
    class_methods: dict[tuple[int, str], set[str]] = {}
    for path, rel in discover_sources(config.inputs):
        try:
            src, tests = _load(path, rel)
        except UnreadableInput as exc:
            logger.warning("skipping %s: %s", path, exc)
            continue
        if not tests:
            continue
        file_index = len(sources)
        sources.append(src)
        for cls, names in src.class_methods.items():
            class_methods[(file_index, cls)] = set(names)
        for t in tests:
            units.append(_Unit(len(units), file_index, t))

    def taken_for(unit: _Unit) -> set[str]:
        return set(class_methods.get((unit.file_index, unit.method.class_name), set()))

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(lambda u: _process(u, gateway, config, taken_for(u)), units))
    else:
        for u in units:
            _process(u, gateway, config, taken_for(u))
    _dedupe_names(units, class_methods)

    try:
        config.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {config.out_dir}: {exc}") from exc

    compile_results = []
    for file_index, src in enumerate(sources):
        target = config.out_dir / src.rel
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(_render_file(src, [u for u in units if u.file_index == file_index]),
                              encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot write {target}: {exc}") from exc
        if config.compile_cmd:
            result = compile_check(target, config.compile_cmd)
            result["file"] = src.rel.as_posix()
            compile_results.append(result)

    records = [_record(u, sources[u.file_index]) for u in units]
    report = {
        "header": {
            "schema_version": REPORT_SCHEMA_VERSION,
            "tool": f"testrefine {__version__}",
            "grammar_version": GRAMMAR_VERSION,
            "template_version": TEMPLATE_VERSION,
            "provider": getattr(gateway.provider, "name", "custom"),
            "config": config.snapshot(),
        },
        "records": records,
        "aggregate": _aggregate(records),
        "compile_checks": compile_results,
        "timing": {
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "total_s": round(time.perf_counter() - started, 6),
            "per_test": [
                {"index": u.index, "purify_ms": round(u.purify_s * 1000, 3),
                 "refine_ms": round(u.refine_s * 1000, 3)}
                for u in units
            ],
        },
    }
    try:
        config.report_file.parent.mkdir(parents=True, exist_ok=True)
        config.report_file.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n",
                                      encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write report {config.report_file}: {exc}") from exc
    if config.export_examples:
        export_examples(report, config.export_examples)
    warnings = [d for rec in records for d in rec["diagnostics"] if "generation failed" in d]
    if units and warnings:
        logger.warning("%d LLM calls failed; affected tests fell back", len(warnings))
    return report
