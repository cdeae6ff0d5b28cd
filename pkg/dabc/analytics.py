"""
Study Analytics

Structural metrics of client units, Spearman correlation with a permutation
p-value, coefficient bucketing, module classification of DABC locations and
the aggregate count tables.
"""
import ast
import builtins
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator
from scipy.stats import rankdata

from .errors import DegenerateInputError, MappingError
from .miner import ChangeKind, DabcRecord
from .pyparse import ParsedUnit, source_lines
from .releases import ReleasePolicy, ReleaseTag, assign_dabc_release

logger = logging.getLogger(__name__)

BUILTIN_NAMES = frozenset(name for name in dir(builtins) if not name.startswith("_"))
FALLBACK_MODULE = "Others"
TIE_TOLERANCE = 1e-12
PERMUTATION_CHUNK = 256

# (lower bound on |r|, level), checked from the top.
_BUCKETS = ((0.90, "very_high"), (0.70, "high"), (0.50, "moderate"), (0.30, "low"))


class CorrelationLevel(str, Enum):
    NEGLIGIBLE = "negligible"
    LOW = "low"
    MODERATE = "moderate"
    HIGH = "high"
    VERY_HIGH = "very_high"


@dataclass(frozen=True)
class StructuralMetrics:
    sloc: int = 0
    blank_loc: int = 0
    comment_loc: int = 0
    api_calls_count: int = 0
    api_calls_unique: int = 0
    builtin_calls_count: int = 0
    builtin_calls_unique: int = 0
    user_calls_count: int = 0
    user_calls_unique: int = 0
    other_calls_count: int = 0
    cyclomatic: int = 0

    @property
    def total_loc(self) -> int:
        return self.sloc + self.blank_loc + self.comment_loc


# Column label used in the correlation table for each metric.
METRIC_LABELS = (
    ("sloc", "SLOC"),
    ("blank_loc", "Blank LOC"),
    ("comment_loc", "Comments LOC"),
    ("api_calls_count", "API functions (count)"),
    ("api_calls_unique", "API functions (unique)"),
    ("builtin_calls_count", "Built-in functions (count)"),
    ("builtin_calls_unique", "Built-in functions (unique)"),
    ("user_calls_count", "User-defined functions (count)"),
    ("user_calls_unique", "User-defined functions (unique)"),
    ("other_calls_count", "Other functions (count)"),
    ("cyclomatic", "Cyclomatic complexity"),
)
UNAVAILABLE_METRICS = ("Extended comments LOC",)


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    level: CorrelationLevel
    p_value: float
    n: int


def _decision_points(tree: ast.AST) -> int:
    points = 0
    for node in ast.walk(tree):
        if isinstance(node, (ast.If, ast.IfExp, ast.For, ast.AsyncFor, ast.While,
                             ast.ExceptHandler, ast.Assert)):
            points += 1
        elif isinstance(node, ast.BoolOp):
            points += len(node.values) - 1
        elif isinstance(node, ast.comprehension):
            points += len(node.ifs)
    return points


def compute_metrics(parsed: ParsedUnit) -> StructuralMetrics:
    sloc = blank = comment = 0
    for line in source_lines(parsed.unit.code):
        stripped = line.strip()
        if not stripped:
            blank += 1
        elif stripped.startswith("#"):
            comment += 1
        else:
            sloc += 1

    imported = parsed.imported_names()
    api, builtin_calls, other = [], [], 0
    for call in parsed.calls:
        head = call.receiver_head
        if (call.receiver_text is None and call.callee_name in imported) or (head and head in imported):
            api.append(call.qualified_text)
        elif call.receiver_text is None and call.callee_name in BUILTIN_NAMES:
            builtin_calls.append(call.callee_name)
        else:
            other += 1

    # An empty unit has no paths at all.
    has_code = any(tree.body for tree in parsed.trees)
    cyclomatic = 1 + sum(_decision_points(tree) for tree in parsed.trees) if has_code else 0

    return StructuralMetrics(
        sloc=sloc,
        blank_loc=blank,
        comment_loc=comment,
        api_calls_count=len(api),
        api_calls_unique=len(set(api)),
        builtin_calls_count=len(builtin_calls),
        builtin_calls_unique=len(set(builtin_calls)),
        user_calls_count=len(parsed.local_calls),
        user_calls_unique=len({c.qualified_text for c in parsed.local_calls}),
        other_calls_count=other,
        cyclomatic=cyclomatic,
    )


def _as_vector(values: Sequence[float], name: str) -> np.ndarray:
    vector = np.asarray(values, dtype=float)
    if vector.ndim != 1:
        raise DegenerateInputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(vector)):
        raise DegenerateInputError(f"{name} contains non-finite values")
    return vector


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    r = float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))
    return min(1.0, max(-1.0, r))


def _ranks(xs: Sequence[float], ys: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    x = _as_vector(xs, "xs")
    y = _as_vector(ys, "ys")
    if len(x) != len(y):
        raise DegenerateInputError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise DegenerateInputError("correlation needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("correlation is undefined for a constant vector")
    return rankdata(x, method="average"), rankdata(y, method="average")


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of the average-rank vectors."""
    rx, ry = _ranks(xs, ys)
    return _pearson(rx, ry)


def perm_pvalue(xs: Sequence[float], ys: Sequence[float], iterations: int = 1000, seed: int = 0,
                chunk_size: int = PERMUTATION_CHUNK) -> float:
    """Two-sided permutation p-value of spearman(xs, ys), smoothed by +1/(iterations+1).

    Permutations are drawn `chunk_size` rows at a time; the draws for a seed do
    not depend on the chunk size.
    """
    if iterations < 100:
        raise ValueError("perm_pvalue needs at least 100 iterations")
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    rx, ry = _ranks(xs, ys)
    observed = abs(_pearson(rx, ry))

    rng = np.random.default_rng(seed)
    dx = rx - rx.mean()
    dx_norm = np.dot(dx, dx)
    hits = 0
    for start in range(0, iterations, chunk_size):
        rows = min(chunk_size, iterations - start)
        order = np.argsort(rng.random((rows, len(ry))), axis=1, kind="stable")
        shuffled = ry[order]
        dy = shuffled - shuffled.mean(axis=1, keepdims=True)
        r = (dy @ dx) / np.sqrt(dx_norm * np.einsum("ij,ij->i", dy, dy))
        hits += int(np.count_nonzero(np.abs(r) >= observed - TIE_TOLERANCE))
    return (hits + 1) / (iterations + 1)


def bucket(coefficient: float) -> CorrelationLevel:
    magnitude = abs(coefficient)
    if magnitude > 1.0 + TIE_TOLERANCE:
        raise ValueError(f"coefficient {coefficient} outside [-1, 1]")
    for lower, level in _BUCKETS:
        if magnitude >= lower:
            return CorrelationLevel(level)
    return CorrelationLevel.NEGLIGIBLE


def correlate(xs: Sequence[float], ys: Sequence[float], iterations: int = 1000, seed: int = 0) -> CorrelationResult:
    coefficient = spearman(xs, ys)
    return CorrelationResult(
        coefficient=coefficient,
        level=bucket(coefficient),
        p_value=perm_pvalue(xs, ys, iterations=iterations, seed=seed),
        n=len(xs),
    )


def metric_correlations(metrics: Sequence[StructuralMetrics], call_counts: Sequence[int],
                        iterations: int = 1000, seed: int = 0, alpha: float = 0.05) -> pd.DataFrame:
    """Correlation of each structural metric with the per-unit call counts."""
    rows = []
    for field_name, label in METRIC_LABELS:
        values = [getattr(m, field_name) for m in metrics]
        try:
            result = correlate(values, call_counts, iterations=iterations, seed=seed)
        except DegenerateInputError as e:
            rows.append({"metric": label, "coefficient": None, "level": "undefined",
                         "p_value": None, "n": len(values), "significant": None, "note": str(e)})
            continue
        rows.append({
            "metric": label,
            "coefficient": round(result.coefficient, 6),
            "level": result.level.value,
            "p_value": round(result.p_value, 6),
            "n": result.n,
            "significant": result.p_value <= alpha,
            "note": "" if result.p_value <= alpha else f"p-value above {alpha}",
        })
    for label in UNAVAILABLE_METRICS:
        rows.append({"metric": label, "coefficient": None, "level": "unavailable", "p_value": None,
                     "n": len(metrics), "significant": None, "note": "not computable from a single unit"})
    return pd.DataFrame(rows, columns=["metric", "coefficient", "level", "p_value", "n", "significant", "note"])


class MappingEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prefix: str
    module: str

    @field_validator("prefix", "module")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must be non-empty")
        return value


def load_mapping(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """Read a module mapping: a JSON array of {prefix, module} objects."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise MappingError(path, f"unreadable file: {e}")
    except json.JSONDecodeError as e:
        raise MappingError(path, f"invalid JSON: {e.msg} at line {e.lineno}")
    if not isinstance(payload, list) or not payload:
        raise MappingError(path, "expected a non-empty JSON array")

    mapping = []
    for index, item in enumerate(payload):
        try:
            entry = MappingEntry.model_validate(item)
        except ValidationError as e:
            raise MappingError(path, f"entry {index}: {e.errors()[0]['msg']}")
        mapping.append((entry.prefix, entry.module))
    return mapping


def classify_module(record_path: str, mapping: Sequence[Tuple[str, str]]) -> str:
    """Module of the longest matching prefix; the earliest entry wins ties."""
    best: Optional[Tuple[str, str]] = None
    for prefix, module in mapping:
        if record_path.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
            best = (prefix, module)
    return best[1] if best else FALLBACK_MODULE


def largest_remainder(counts: Sequence[int], decimals: int = 1) -> List[float]:
    """Percentages rounded so that they sum to exactly 100 (when any count is non-zero)."""
    total = sum(counts)
    if total == 0:
        return [0.0 for _ in counts]
    scale = 100 * 10 ** decimals
    floors, remainders = [], []
    for count in counts:
        q, r = divmod(count * scale, total)
        floors.append(q)
        remainders.append(r)
    leftover = scale - sum(floors)
    for index in sorted(range(len(counts)), key=lambda i: (-remainders[i], i))[:leftover]:
        floors[index] += 1
    return [round(units / 10 ** decimals, decimals) for units in floors]


def table_percents(counts: Sequence[int], decimals: int = 1, tolerance: float = 0.1) -> List[float]:
    """Half-up rounded percentages, re-rounded by largest remainder if the sum drifts past `tolerance`."""
    total = sum(counts)
    if total == 0:
        return [0.0 for _ in counts]
    scale = 100 * 10 ** decimals
    units = [(2 * count * scale + total) // (2 * total) for count in counts]
    if abs(sum(units) - scale) > round(tolerance * 10 ** decimals):
        return largest_remainder(counts, decimals)
    return [round(u / 10 ** decimals, decimals) for u in units]


def count_table(counter: Mapping[str, int], key: str, value: str = "count") -> pd.DataFrame:
    """Rows sorted by count descending then name, with a percent column."""
    items = sorted(counter.items(), key=lambda kv: (-kv[1], str(kv[0])))
    percents = table_percents([count for _, count in items])
    rows = [{key: name, value: count, "percent": pct} for (name, count), pct in zip(items, percents)]
    return pd.DataFrame(rows, columns=[key, value, "percent"])


def aggregate(records: Iterable[DabcRecord], vulnerable_calls: Iterable[Mapping],
              tags: Optional[Sequence[ReleaseTag]], mapping: Sequence[Tuple[str, str]],
              policy: Optional[ReleasePolicy] = None,
              clients_scanned: Optional[int] = None) -> Dict[str, pd.DataFrame]:
    """The study's count tables, keyed by output name.

    `vulnerable_calls` are report rows (dabc_id, path, verdict, ...).
    """
    dabcs = [r for r in records if r.change_kind is ChangeKind.DEFAULT_VALUE_CHANGE]
    rows = list(vulnerable_calls)
    by_id = {r.dabc_id: r for r in dabcs}
    module_of = {r.dabc_id: classify_module(r.path, mapping) for r in dabcs}

    release_of: Dict[str, Optional[ReleaseTag]] = {}
    if tags and policy is not None:
        for record in dabcs:
            release_of[record.dabc_id] = assign_dabc_release(record, tags, policy)

    def version_label(record: DabcRecord) -> str:
        tag = release_of.get(record.dabc_id)
        return tag.version.raw if tag else record.version

    tables: Dict[str, pd.DataFrame] = {}

    listing = []
    for record in sorted(dabcs, key=lambda r: (r.path, r.dabc_id)):
        tag = release_of.get(record.dabc_id)
        listing.append({
            "dabc_id": record.dabc_id,
            "class": record.class_name,
            "function": record.function_name,
            "argument": record.argument,
            "version": record.version,
            "release_kind": tag.kind.value if tag else None,
            "module": module_of[record.dabc_id],
            "old_default": record.old_default,
            "new_default": record.new_default,
            "reason": record.reason.value if record.reason else None,
            "effect": record.effect.value if record.effect else None,
        })
    tables["dabcs"] = pd.DataFrame(listing, columns=["dabc_id", "class", "function", "argument", "version",
                                                     "release_kind", "module", "old_default", "new_default",
                                                     "reason", "effect"])

    versions = count_table(Counter(version_label(r) for r in dabcs), "version", "dabcs")
    if release_of:
        tag_by_label = {t.version.raw: t for t in release_of.values() if t is not None}
        versions.insert(1, "release_kind", [tag_by_label[v].kind.value if v in tag_by_label else None
                                            for v in versions["version"]])
        versions.insert(2, "release_date", [tag_by_label[v].date.isoformat() if v in tag_by_label else None
                                            for v in versions["version"]])
    tables["dabcs_by_version"] = versions
    tables["dabcs_by_module"] = count_table(Counter(module_of[r.dabc_id] for r in dabcs), "module", "dabcs")
    tables["dabcs_by_argument"] = count_table(Counter(r.argument for r in dabcs), "argument", "dabcs")
    if any(r.reason for r in dabcs):
        tables["dabcs_by_reason"] = count_table(Counter(r.reason.value for r in dabcs if r.reason), "reason", "dabcs")
    if any(r.effect for r in dabcs):
        tables["dabcs_by_effect"] = count_table(Counter(r.effect.value for r in dabcs if r.effect), "effect", "dabcs")

    vulnerable = [row for row in rows if row["verdict"] == "vulnerable"]
    tables["calls_by_dabc"] = count_table(Counter(row["dabc_id"] for row in vulnerable), "dabc_id", "calls")
    tables["calls_by_version"] = count_table(
        Counter(version_label(by_id[row["dabc_id"]]) for row in vulnerable if row["dabc_id"] in by_id),
        "version", "calls")
    tables["calls_by_module"] = count_table(
        Counter(module_of[row["dabc_id"]] for row in vulnerable if row["dabc_id"] in by_id),
        "module", "calls")

    vulnerable_clients = len({row["path"] for row in vulnerable})
    summary = [
        {"metric": "clients_with_findings", "value": len({row["path"] for row in rows})},
        {"metric": "vulnerable_clients", "value": vulnerable_clients},
        {"metric": "vulnerable_calls", "value": len(vulnerable)},
        {"metric": "indeterminate_calls", "value": sum(1 for row in rows if row["verdict"] == "indeterminate")},
    ]
    if clients_scanned is not None:
        share = round(100.0 * vulnerable_clients / clients_scanned, 1) if clients_scanned else 0.0
        summary.insert(0, {"metric": "clients_scanned", "value": clients_scanned})
        summary.append({"metric": "vulnerable_clients_percent", "value": share})
    tables["client_summary"] = pd.DataFrame(summary, columns=["metric", "value"])
    return tables


def metrics_frame(paths: Sequence[str], metrics: Sequence[StructuralMetrics],
                  call_counts: Sequence[int]) -> pd.DataFrame:
    rows = [dict(path=p, vulnerable_calls=c, **asdict(m)) for p, m, c in zip(paths, metrics, call_counts)]
    columns = ["path", "vulnerable_calls"] + [name for name, _ in METRIC_LABELS]
    return pd.DataFrame(rows, columns=columns)


def write_table(frame: pd.DataFrame, out_dir: Union[str, Path], name: str, formats: Iterable[str]) -> List[Path]:
    """Write `frame` as <name>.csv / .json / .md; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in sorted(formats):
        if fmt == "csv":
            target = out_dir / f"{name}.csv"
            frame.to_csv(target, index=False, lineterminator="\n")
        elif fmt == "json":
            target = out_dir / f"{name}.json"
            target.write_text(frame.to_json(orient="records", indent=2) + "\n", encoding="utf-8")
        elif fmt == "markdown":
            target = out_dir / f"{name}.md"
            target.write_text(frame.to_markdown(index=False) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"Unknown output format {fmt!r}")
        written.append(target)
    return written
