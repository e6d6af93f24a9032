"""Command line entry points.

``testrefine refine <paths...> --out DIR`` (or just ``refine ...``) runs the
pipeline; ``testrefine export-examples REPORT FILE`` re-exports a bundle
from an existing report.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import yaml

from .llm_gateway import ProviderConfig
from .pipeline import ConfigError, IoError, RunConfig, export_examples, run_pipeline
from .similarity import CodeBleuConfig

logger = logging.getLogger("testrefine")

_SCALAR_KEYS = {
    "threshold", "workers", "offline", "fixtures_dir", "compile_cmd",
    "report_path", "audit_path", "export_examples", "keywords",
}


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Key-value document (YAML or JSON) mirroring :class:`RunConfig`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def _sub_config(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    if "credential" in data or "api_key" in data:
        raise ConfigError("credentials are read from the environment only")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} config: {exc}") from exc


def build_run_config(args: argparse.Namespace) -> RunConfig:
    data = load_config_file(args.config) if args.config else {}
    unknown = set(data) - _SCALAR_KEYS - {"provider", "codebleu"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict[str, Any] = {k: data[k] for k in _SCALAR_KEYS if k in data}
    if "keywords" in kwargs:
        kwargs["keywords"] = tuple(kwargs["keywords"])
    for key in ("fixtures_dir", "report_path", "audit_path", "export_examples"):
        if kwargs.get(key) is not None:
            kwargs[key] = Path(kwargs[key])
    overrides = {
        "threshold": args.threshold,
        "workers": args.workers,
        "compile_cmd": args.compile_cmd,
        "export_examples": Path(args.export_examples) if args.export_examples else None,
        "report_path": Path(args.report) if args.report else None,
        "fixtures_dir": Path(args.fixtures) if args.fixtures else None,
        "audit_path": Path(args.audit_log) if args.audit_log else None,
    }
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    if args.offline:
        kwargs["offline"] = True
    return RunConfig(
        inputs=[Path(p) for p in args.paths],
        out_dir=Path(args.out),
        provider=_sub_config(ProviderConfig, data.get("provider"), "provider"),
        codebleu=_sub_config(CodeBleuConfig, data.get("codebleu"), "codebleu"),
        **kwargs,
    )


def _add_refine_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("paths", nargs="+", help="Java files or directories")
    p.add_argument("--out", required=True, help="output directory (mirrors input layout)")
    p.add_argument("--offline", action="store_true", help="use the mock provider")
    p.add_argument("--fixtures", help="canned responses for --offline (one <hash>.txt per request)")
    p.add_argument("--threshold", type=float, help="comment anchoring threshold (default 0.7)")
    p.add_argument("--workers", type=int, help="parallel workers (default 1)")
    p.add_argument("--config", help="YAML/JSON config file")
    p.add_argument("--compile-cmd", help="command run on every output file; {file} is substituted")
    p.add_argument("--export-examples", help="write an in-context example bundle here")
    p.add_argument("--report", help="report path (default OUT/refinement-report.json)")
    p.add_argument("--audit-log", help="append every LLM exchange to this JSONL file")
    p.add_argument("-v", "--verbose", action="store_true")


def _summary(report: dict[str, Any]) -> str:
    agg = report["aggregate"]
    return (
        f"{agg['tests']} tests -> {agg['refined_tests']} refined "
        f"({agg['passthrough']} passed through, {agg['skipped']} skipped); "
        f"comments placed {agg['comments_placed']}, dropped {agg['comments_dropped']}; "
        f"identifiers renamed {agg['identifiers_renamed']}; "
        f"preservation failures {agg['preservation_failures']}"
    )


def _run_refine(args: argparse.Namespace) -> int:
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_run_config(args)
        report = run_pipeline(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IoError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    print(_summary(report))
    print(f"report: {config.report_file}")
    return 0


def _run_export(args: argparse.Namespace) -> int:
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    print(export_examples(report, args.output))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="testrefine", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    refine = sub.add_parser("refine", help="purify and refine JUnit tests")
    _add_refine_arguments(refine)
    refine.set_defaults(func=_run_refine)
    export = sub.add_parser("export-examples", help="bundle refined tests from a report")
    export.add_argument("report")
    export.add_argument("output")
    export.set_defaults(func=_run_export)
    args = parser.parse_args(argv)
    return args.func(args)


def refine_main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="refine", description="Purify and refine JUnit tests.")
    _add_refine_arguments(parser)
    return _run_refine(parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
