"""
Signature Diffing

Builds signature snapshots of library checkouts, diffs parameter defaults
between two of them and reconciles the diffs with the documented records.
"""
import ast
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from joblib import Parallel, delayed

from .errors import UnitLoadError, UnitParseError
from .miner import ChangeKind, DabcRecord
from .pyparse import FunctionDef, ParamSpec, discover_sources, load_unit, parse_unit

logger = logging.getLogger(__name__)


class DiffKind(str, Enum):
    VALUE_CHANGED = "value_changed"
    DEFAULT_ADDED = "default_added"
    DEFAULT_REMOVED = "default_removed"


@dataclass
class SignatureSnapshot:
    source_label: str
    functions: Dict[str, FunctionDef] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)

    @property
    def entries(self) -> Dict[str, Tuple[ParamSpec, ...]]:
        return {key: fn.params for key, fn in self.functions.items()}

    def lookup(self, class_name: Optional[str], function_name: str) -> Optional[FunctionDef]:
        key = f"{class_name}.{function_name}" if class_name else function_name
        return self.functions.get(key)

    def __len__(self) -> int:
        return len(self.functions)


@dataclass(frozen=True)
class DefaultDiff:
    class_name: Optional[str]
    function_name: str
    param: str
    old_default: Optional[str]
    new_default: Optional[str]
    diff_kind: DiffKind

    @property
    def fqn(self) -> Tuple[Optional[str], str, str]:
        return (self.class_name, self.function_name, self.param)

    def to_dict(self) -> Dict[str, Optional[str]]:
        return {
            "class": self.class_name,
            "function": self.function_name,
            "argument": self.param,
            "old_default": self.old_default,
            "new_default": self.new_default,
            "diff_kind": self.diff_kind.value,
        }


@dataclass
class ReconcileReport:
    documented: List[Tuple[DefaultDiff, DabcRecord]] = field(default_factory=list)
    undocumented: List[DefaultDiff] = field(default_factory=list)
    doc_only: List[DabcRecord] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "summary": {
                "documented": len(self.documented),
                "undocumented": len(self.undocumented),
                "doc_only": len(self.doc_only),
            },
            "documented": [dict(diff.to_dict(), dabc_url=record.dabc_url, version=record.version)
                           for diff, record in self.documented],
            "undocumented": [diff.to_dict() for diff in self.undocumented],
            "doc_only": [record.to_dict() for record in self.doc_only],
        }


def normalize_default(text: Optional[str]) -> Optional[str]:
    """Canonical text of a default expression for comparison."""
    if text is None:
        return None
    try:
        return ast.unparse(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError):
        return re.sub(r"\s+", " ", text).strip().replace('"', "'")


def _file_defs(path: Path, rel_path: str) -> Tuple[List[FunctionDef], Optional[str]]:
    try:
        parsed = parse_unit(load_unit(path, label=rel_path))
    except (UnitLoadError, UnitParseError) as e:
        return [], str(e)
    return parsed.defs, None


def snapshot(root: Union[str, Path], label: str, jobs: int = 1) -> SignatureSnapshot:
    """Map every `Class.function` / `function` under root to its signature.

    A later definition of the same key (in path order) replaces the earlier one.
    """
    root = Path(root)
    paths = discover_sources(root, (".py",))
    results = Parallel(n_jobs=jobs)(
        delayed(_file_defs)(path, path.relative_to(root).as_posix()) for path in paths
    )

    result = SignatureSnapshot(source_label=label)
    origins: Dict[str, str] = {}
    for path, (defs, problem) in zip(paths, results):
        rel_path = path.relative_to(root).as_posix()
        if problem:
            result.warnings.append(problem)
            logger.warning("%s: %s", label, problem)
            continue
        for fn in defs:
            if fn.key in result.functions:
                message = f"duplicate signature {fn.key} in {rel_path} replaces {origins[fn.key]}"
                result.warnings.append(message)
                logger.debug("%s: %s", label, message)
            result.functions[fn.key] = fn
            origins[fn.key] = rel_path

    duplicates = sum(1 for w in result.warnings if w.startswith("duplicate signature"))
    if duplicates:
        logger.warning("%s: %d duplicate signature key(s); later definitions kept", label, duplicates)
    logger.info("Snapshot %s: %d signature(s) from %d file(s)", label, len(result), len(paths))
    return result


def diff_defaults(old: SignatureSnapshot, new: SignatureSnapshot) -> List[DefaultDiff]:
    diffs: List[DefaultDiff] = []
    new_entries = new.functions
    for key in sorted(set(old.functions) & set(new_entries)):
        old_fn = old.functions[key]
        new_params = {p.name: p for p in new_entries[key].params}
        for before in old_fn.params:
            after = new_params.get(before.name)
            if after is None:
                continue
            old_text = normalize_default(before.default_expr)
            new_text = normalize_default(after.default_expr)
            if old_text == new_text:
                continue
            if old_text is None:
                kind = DiffKind.DEFAULT_ADDED
            elif new_text is None:
                kind = DiffKind.DEFAULT_REMOVED
            else:
                kind = DiffKind.VALUE_CHANGED
            diffs.append(DefaultDiff(
                class_name=old_fn.class_name,
                function_name=old_fn.function_name,
                param=before.name,
                old_default=before.default_expr,
                new_default=after.default_expr,
                diff_kind=kind,
            ))
    return diffs


def reconcile(diffs: Sequence[DefaultDiff], records: Sequence[DabcRecord]) -> ReconcileReport:
    """Split diffs into documented/undocumented and records into matched/doc-only."""
    candidates = [r for r in records if r.change_kind is ChangeKind.DEFAULT_VALUE_CHANGE]
    by_fqn: Dict[Tuple[Optional[str], str, Optional[str]], List[DabcRecord]] = {}
    for record in candidates:
        by_fqn.setdefault(record.fqn, []).append(record)

    report = ReconcileReport()
    matched = set()
    for diff in diffs:
        found = by_fqn.get(diff.fqn)
        if found:
            report.documented.append((diff, found[0]))
            matched.add(diff.fqn)
        else:
            report.undocumented.append(diff)
    report.doc_only = [r for r in candidates if r.fqn not in matched]
    return report
