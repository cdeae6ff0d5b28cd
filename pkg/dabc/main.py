"""
DABC Command-Line Interface

Five subcommands over the toolkit: mine, sigdiff, scan, report and stats.
Exit codes: 0 success, 1 fatal or invalid input (nothing written), 2 finished
with skipped units or unparseable files.
"""
import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from joblib import Parallel, delayed
from pydantic import ValidationError

from .analytics import (StructuralMetrics, aggregate, compute_metrics, load_mapping, metric_correlations,
                        metrics_frame, write_table)
from .config import DEFAULT_URL_BASE, OUTPUT_FORMATS, RunConfig, env_default, env_flag
from .database import DabcDatabase, load_call_report, write_jsonl
from .errors import DabcError, UnitLoadError, UnitParseError
from .matcher import REPORT_COLUMNS, DabcDefinition, build_definitions, client_rollup, scan_client
from .miner import mine_library
from .pyparse import discover_units, load_unit, parse_unit, unit_imports_library
from .releases import get_policy, load_tags
from .sigdiff import diff_defaults, reconcile, snapshot

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

_LEVEL_COLORS = {
    "DEBUG": "\033[36m",
    "INFO": "\033[32m",
    "WARNING": "\033[33m",
    "ERROR": "\033[31m",
    "CRITICAL": "\033[1;31m",
}
_RESET = "\033[0m"


class LevelColorFormatter(logging.Formatter):
    def __init__(self, color: bool):
        super().__init__("%(levelname)s %(name)s: %(message)s")
        self.color = color

    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        code = _LEVEL_COLORS.get(record.levelname)
        if self.color and code:
            return text.replace(record.levelname, f"{code}{record.levelname}{_RESET}", 1)
        return text


def configure_logging(verbose: bool = False) -> logging.Handler:
    """Install the single stderr handler on the package logger."""
    if verbose:
        level = logging.DEBUG
    else:
        level = logging.getLevelName(env_default("DABC_LOG_LEVEL", "INFO").upper())
        if not isinstance(level, int):
            level = logging.INFO
    color = not env_flag("DABC_NO_COLOR") and sys.stderr.isatty()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(LevelColorFormatter(color))
    package_logger = logging.getLogger("dabc")
    package_logger.handlers[:] = [handler]
    package_logger.setLevel(level)
    return handler


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="dabc-out", help="Output directory")
    common.add_argument("--format", default="csv,json",
                        help=f"Comma-separated table formats ({','.join(OUTPUT_FORMATS)})")
    common.add_argument("--markdown", action="store_true", help="Also render markdown tables")
    common.add_argument("--policy", default="sklearn", help="Release policy: sklearn, pandas, numpy or semver")
    common.add_argument("--jobs", default=env_default("DABC_JOBS", "1"), help="Worker processes")
    common.add_argument("--seed", default=env_default("DABC_SEED", "0"), help="Permutation seed")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="dabc", description="Default Argument Breaking Change toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    mine = commands.add_parser("mine", parents=[common], help="Mine versionchanged directives from a library")
    mine.add_argument("--library-root", type=Path)
    mine.add_argument("--db", type=Path, help="Database to write (default <out>/dabcs.jsonl)")
    mine.add_argument("--url-base", default=env_default("DABC_URL_BASE", DEFAULT_URL_BASE))

    sigdiff = commands.add_parser("sigdiff", parents=[common], help="Diff defaults between two checkouts")
    sigdiff.add_argument("--old-root", type=Path)
    sigdiff.add_argument("--new-root", type=Path)
    sigdiff.add_argument("--db", type=Path, help="Documented records to reconcile against")

    for name, help_text in (("scan", "Find calls vulnerable to DABCs in a client corpus"),
                            ("stats", "Correlate structural metrics with vulnerable calls")):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.add_argument("--corpus", type=Path)
        sub.add_argument("--db", type=Path)
        sub.add_argument("--library-root", type=Path, help="Library checkout supplying DABC signatures")
        sub.add_argument("--library", help="Import token a client must import")
        sub.add_argument("--import-match", choices=("component", "substring"), default="component")
        if name == "scan":
            sub.add_argument("--include-safe", action="store_true")
        else:
            sub.add_argument("--calls", type=Path, help="Existing vulnerable_calls.jsonl")
            sub.add_argument("--iterations", default="1000")

    report = commands.add_parser("report", parents=[common], help="Aggregate DABC and call tables")
    report.add_argument("--db", type=Path)
    report.add_argument("--calls", type=Path, help="vulnerable_calls.jsonl from scan")
    report.add_argument("--tags", type=Path, help="Release manifest CSV (version,date)")
    report.add_argument("--mapping", type=Path, help="Module mapping JSON")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    formats = {f.strip() for f in args.format.split(",") if f.strip()}
    if args.markdown:
        formats.add("markdown")
    values = {
        "command": args.command,
        "output_dir": Path(args.out),
        "formats": formats,
        "policy": args.policy,
        "jobs": args.jobs,
        "seed": args.seed,
        "verbose": args.verbose,
        "library_root": getattr(args, "library_root", None),
        "old_root": getattr(args, "old_root", None),
        "new_root": getattr(args, "new_root", None),
        "corpus_root": getattr(args, "corpus", None),
        "dabc_db": getattr(args, "db", None),
        "calls_file": getattr(args, "calls", None),
        "tags_file": getattr(args, "tags", None),
        "mapping_file": getattr(args, "mapping", None),
        "library_token": getattr(args, "library", None),
        "import_match_mode": getattr(args, "import_match", "component"),
        "include_safe": getattr(args, "include_safe", False),
        "iterations": getattr(args, "iterations", 1000),
    }
    if getattr(args, "url_base", None):
        values["url_base"] = args.url_base
    return RunConfig(**values)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@dataclass
class UnitResult:
    path: str
    imports_library: bool = False
    partial: bool = False
    rows: List[Dict[str, object]] = field(default_factory=list)
    metrics: Optional[StructuralMetrics] = None
    skip_reason: Optional[str] = None


def process_unit(path: Path, rel_path: str, token: str, mode: str, definitions: Sequence[DabcDefinition],
                 include_safe: bool = False, with_metrics: bool = False) -> UnitResult:
    """Load, filter, match and optionally measure one client unit."""
    try:
        parsed = parse_unit(load_unit(path, label=rel_path))
    except (UnitLoadError, UnitParseError) as e:
        return UnitResult(rel_path, skip_reason=e.reason)
    if not unit_imports_library(parsed, token, mode):
        return UnitResult(rel_path, partial=parsed.partial)
    rows = [c.to_row() for c in scan_client(parsed, definitions, include_safe)] if definitions else []
    return UnitResult(
        rel_path,
        imports_library=True,
        partial=parsed.partial,
        rows=rows,
        metrics=compute_metrics(parsed) if with_metrics else None,
    )


def run_corpus(config: RunConfig, definitions: Sequence[DabcDefinition], with_metrics: bool = False) -> List[UnitResult]:
    root = config.corpus_root
    paths = discover_units(root)
    results = Parallel(n_jobs=config.jobs)(
        delayed(process_unit)(path, path.relative_to(root).as_posix(), config.import_token,
                              config.import_match_mode, definitions, config.include_safe, with_metrics)
        for path in paths
    )
    for result in results:
        if result.skip_reason:
            logger.warning("%s: skipped: %s", result.path, result.skip_reason)
    importing = sum(1 for r in results if r.imports_library)
    skipped = sum(1 for r in results if r.skip_reason)
    logger.info("Scanned %d unit(s): %d import %s, %d skipped", len(results), importing, config.import_token, skipped)
    return results


def load_definitions(config: RunConfig) -> List[DabcDefinition]:
    records = DabcDatabase(config.dabc_db).load_matchable()
    snapshots = []
    if config.library_root is not None:
        snapshots.append(snapshot(config.library_root, config.library_root.name, jobs=config.jobs))
    bundled = config.bundled_signatures()
    if bundled is not None:
        snapshots.append(snapshot(bundled, f"bundled:{config.policy}", jobs=config.jobs))
    definitions = build_definitions(records, snapshots)
    logger.info("%d of %d DABC record(s) have a usable signature", len(definitions), len(records))
    return definitions


def cmd_mine(config: RunConfig) -> int:
    result = mine_library(config.library_root, config.url_base, jobs=config.jobs)
    db_path = config.dabc_db or config.output_dir / "dabcs.jsonl"
    DabcDatabase(db_path).save(result.records)

    summary = DabcDatabase.summary(result.records)
    _write_json(config.output_dir / "mine_summary.json", {
        "hits": len(result.hits),
        "files_with_hits": len({h.path for h in result.hits}),
        "records": summary["records"],
        "change_kinds": summary["change_kinds"],
        "attributions": dict(sorted(Counter(h.attribution.value for h in result.hits).items())),
        "parse_warnings": result.warnings,
    })
    logger.info("Wrote %d record(s) to %s", len(result.records), db_path)
    return EXIT_PARTIAL if result.warnings else EXIT_OK


def cmd_sigdiff(config: RunConfig) -> int:
    records = DabcDatabase(config.dabc_db).load() if config.dabc_db else []
    old = snapshot(config.old_root, config.old_root.name, jobs=config.jobs)
    new = snapshot(config.new_root, config.new_root.name, jobs=config.jobs)
    diffs = diff_defaults(old, new)
    report = reconcile(diffs, records)

    payload = {"old": old.source_label, "new": new.source_label, "diffs": [d.to_dict() for d in diffs]}
    payload.update(report.to_dict())
    _write_json(config.output_dir / "sigdiff.json", payload)
    logger.info("%d default diff(s): %d documented, %d undocumented, %d doc-only",
                len(diffs), len(report.documented), len(report.undocumented), len(report.doc_only))

    failures = [w for w in old.warnings + new.warnings if not w.startswith("duplicate signature")]
    return EXIT_PARTIAL if failures else EXIT_OK


def _calls_frame(rows: List[Dict[str, object]]) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=list(REPORT_COLUMNS))
    frame["line"] = frame["line"].astype("Int64")
    frame["cell"] = frame["cell"].astype("Int64")
    return frame


def cmd_scan(config: RunConfig) -> int:
    definitions = load_definitions(config)
    if not definitions:
        logger.warning("No matchable DABC definitions; the report will be empty")
    results = run_corpus(config, definitions)

    rows = [row for result in results for row in result.rows]
    out = config.output_dir
    write_jsonl(out / "vulnerable_calls.jsonl", rows)
    _calls_frame(rows).to_csv(out / "vulnerable_calls.csv", index=False, lineterminator="\n")
    rollup = pd.DataFrame(client_rollup(rows),
                          columns=["path", "vulnerable_calls", "indeterminate_calls", "safe_calls", "vulnerable"])
    rollup.to_csv(out / "clients.csv", index=False, lineterminator="\n")

    verdicts = Counter(row["verdict"] for row in rows)
    skipped = [{"path": r.path, "reason": r.skip_reason} for r in results if r.skip_reason]
    _write_json(out / "scan_summary.json", {
        "library": config.import_token,
        "import_match": config.import_match_mode,
        "definitions": len(definitions),
        "units_found": len(results),
        "units_importing": sum(1 for r in results if r.imports_library),
        "units_partial": sum(1 for r in results if r.partial),
        "units_skipped": len(skipped),
        "vulnerable_calls": verdicts.get("vulnerable", 0),
        "indeterminate_calls": verdicts.get("indeterminate", 0),
        "safe_calls": verdicts.get("safe", 0),
        "vulnerable_clients": len({row["path"] for row in rows if row["verdict"] == "vulnerable"}),
        "skipped": skipped,
    })
    return EXIT_PARTIAL if skipped else EXIT_OK


def _clients_scanned(calls_file: Optional[Path]) -> Optional[int]:
    if calls_file is None:
        return None
    summary = calls_file.parent / "scan_summary.json"
    if not summary.is_file():
        return None
    try:
        return int(json.loads(summary.read_text(encoding="utf-8"))["units_importing"])
    except (ValueError, KeyError, TypeError):
        logger.warning("%s: unreadable scan summary, client totals omitted", summary)
        return None


def cmd_report(config: RunConfig) -> int:
    policy = get_policy(config.policy)
    records = DabcDatabase(config.dabc_db).load()
    rows = [row.model_dump() for row in load_call_report(config.calls_file)] if config.calls_file else []
    tags_path = config.resolved_tags()
    tags = load_tags(tags_path, policy) if tags_path else None
    mapping_path = config.resolved_mapping()
    mapping = load_mapping(mapping_path) if mapping_path else []
    if not mapping:
        logger.warning("No module mapping for policy %s; every module is %r", config.policy, "Others")

    tables = aggregate(records, rows, tags, mapping, policy=policy,
                       clients_scanned=_clients_scanned(config.calls_file))
    for name, frame in tables.items():
        write_table(frame, config.output_dir, name, config.formats)
    logger.info("Wrote %d table(s) to %s", len(tables), config.output_dir)
    return EXIT_OK


def cmd_stats(config: RunConfig) -> int:
    call_rows = [row.model_dump() for row in load_call_report(config.calls_file)] if config.calls_file else None
    definitions = load_definitions(config) if call_rows is None else []
    results = run_corpus(config, definitions, with_metrics=True)
    if call_rows is None:
        call_rows = [row for result in results for row in result.rows]

    vulnerable = Counter(row["path"] for row in call_rows if row["verdict"] == "vulnerable")
    measured = [r for r in results if r.imports_library and r.metrics is not None]
    paths = [r.path for r in measured]
    metrics = [r.metrics for r in measured]
    counts = [vulnerable.get(p, 0) for p in paths]

    correlations = metric_correlations(metrics, counts, iterations=config.iterations, seed=config.seed)
    write_table(correlations, config.output_dir, "correlations", config.formats)
    write_table(metrics_frame(paths, metrics, counts), config.output_dir, "unit_metrics", config.formats)
    return EXIT_PARTIAL if any(r.skip_reason for r in results) else EXIT_OK


COMMAND_HANDLERS = {
    "mine": cmd_mine,
    "sigdiff": cmd_sigdiff,
    "scan": cmd_scan,
    "report": cmd_report,
    "stats": cmd_stats,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_FATAL

    configure_logging(args.verbose)
    try:
        config = load_config(args)
    except ValidationError as e:
        detail = e.errors()[0]
        where = ".".join(str(p) for p in detail.get("loc", ()))
        logger.error("Invalid arguments: %s%s", f"{where}: " if where else "", detail.get("msg"))
        return EXIT_FATAL

    try:
        return COMMAND_HANDLERS[config.command](config)
    except DabcError as e:
        logger.error("%s", e)
        return EXIT_FATAL
