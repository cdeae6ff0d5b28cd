"""
BC Matching

Pairs client call sites with DABC definitions, binds the call's arguments to
the definition's parameters and issues a verdict per pair.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .miner import ChangeKind, DabcRecord
from .pyparse import POSITIONAL_KINDS, CallSite, FunctionDef, ParamKind, ParamSpec, ParsedUnit

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("dabc_id", "path", "line", "cell", "verdict", "reason", "receiver")


class Verdict(str, Enum):
    VULNERABLE = "vulnerable"
    SAFE = "safe"
    INDETERMINATE = "indeterminate"
    NO_MATCH = "no_match"


class BindSource(str, Enum):
    POSITIONAL = "positional"
    KEYWORD = "keyword"
    UNBOUND = "unbound"


@dataclass(frozen=True)
class DabcDefinition:
    record: DabcRecord
    class_name: Optional[str]
    callable_name: str
    params: Tuple[ParamSpec, ...]
    changed_param: str
    provenance: str = ""

    @property
    def dabc_id(self) -> str:
        return self.record.dabc_id

    def param(self, name: str) -> Optional[ParamSpec]:
        for p in self.params:
            if p.name == name:
                return p
        return None

    @property
    def positional_slots(self) -> List[ParamSpec]:
        return [p for p in self.params if p.kind in POSITIONAL_KINDS]


@dataclass(frozen=True)
class Binding:
    sources: Dict[str, BindSource]
    mismatch: Optional[str] = None


@dataclass(frozen=True)
class MatchOutcome:
    verdict: Verdict
    reason: str


@dataclass(frozen=True)
class VulnerableCall:
    dabc: DabcRecord
    call: CallSite
    verdict: Verdict
    reason: str

    @property
    def sort_key(self):
        return (self.call.path, self.call.line, self.call.column, self.dabc.dabc_id)

    def to_row(self) -> Dict[str, object]:
        return {
            "dabc_id": self.dabc.dabc_id,
            "path": self.call.path,
            "line": self.call.line,
            "cell": self.call.cell,
            "verdict": self.verdict.value,
            "reason": self.reason,
            "receiver": self.call.receiver_text,
        }


def _drops_receiver(fn: FunctionDef) -> bool:
    if not fn.class_name:
        return False
    if any(d.split(".")[-1] == "staticmethod" for d in fn.decorators):
        return False
    return bool(fn.params) and fn.params[0].kind in POSITIONAL_KINDS


def build_definition(record: DabcRecord, fn: FunctionDef, provenance: str = "") -> Optional[DabcDefinition]:
    """Definition for `record` from the library signature `fn`, or None if the argument is gone."""
    params = fn.params[1:] if _drops_receiver(fn) else fn.params
    if record.argument is None or not any(p.name == record.argument for p in params):
        return None
    is_constructor = record.function_name == "__init__" and record.class_name
    return DabcDefinition(
        record=record,
        class_name=record.class_name,
        callable_name=record.class_name if is_constructor else record.function_name,
        params=tuple(params),
        changed_param=record.argument,
        provenance=provenance,
    )


def build_definitions(records: Iterable[DabcRecord], snapshots: Sequence) -> List[DabcDefinition]:
    """Definitions for every matchable record.

    `snapshots` are tried in order; the first one holding the record's
    (class, function) supplies the parameter list.
    """
    definitions: List[DabcDefinition] = []
    for record in records:
        if record.change_kind is not ChangeKind.DEFAULT_VALUE_CHANGE or not record.argument:
            continue
        found = None
        for snap in snapshots:
            fn = snap.lookup(record.class_name, record.function_name)
            if fn is not None:
                found = (fn, snap.source_label)
                break
        if found is None:
            logger.warning("%s: no signature found, skipped", record.dabc_id)
            continue
        definition = build_definition(record, found[0], provenance=found[1])
        if definition is None:
            logger.warning("%s: argument %r missing from the %s signature, skipped",
                           record.dabc_id, record.argument, found[1])
            continue
        definitions.append(definition)
    return definitions


def bind_arguments(defn: DabcDefinition, call: CallSite) -> Binding:
    """Assign positionals in declaration order and keywords by name."""
    sources = {p.name: BindSource.UNBOUND for p in defn.params}
    slots = defn.positional_slots
    has_vararg = any(p.kind is ParamKind.VARARG for p in defn.params)
    has_kwvararg = any(p.kind is ParamKind.KWVARARG for p in defn.params)

    # Positionals after a *expansion land in unknown slots.
    fixed = call.positional_args if call.star_args_index is None else call.positional_args[:call.star_args_index]
    if len(fixed) > len(slots) and not has_vararg:
        return Binding(sources, f"{len(fixed)} positional argument(s) for {len(slots)} slot(s)")
    for param, _ in zip(slots, fixed):
        sources[param.name] = BindSource.POSITIONAL

    for name in call.keyword_args:
        param = defn.param(name)
        if param is None or param.kind not in (ParamKind.POSITIONAL_OR_KEYWORD, ParamKind.KEYWORD_ONLY):
            if has_kwvararg:
                continue
            return Binding(sources, f"unexpected keyword argument {name!r}")
        if sources[name] is not BindSource.UNBOUND:
            return Binding(sources, f"multiple values for argument {name!r}")
        sources[name] = BindSource.KEYWORD
    return Binding(sources)


def _positionally_reachable(defn: DabcDefinition, star_index: int) -> bool:
    for index, param in enumerate(defn.positional_slots):
        if param.name == defn.changed_param:
            return index >= star_index
    return False


def match_call(defn: DabcDefinition, call: CallSite, unit_identifiers) -> MatchOutcome:
    param = defn.changed_param
    if call.callee_name != defn.callable_name:
        return MatchOutcome(Verdict.NO_MATCH, "callee name differs")
    if defn.class_name and defn.class_name not in unit_identifiers:
        return MatchOutcome(Verdict.NO_MATCH, f"class {defn.class_name} not referenced in unit")
    if call.has_star_kwargs:
        return MatchOutcome(Verdict.INDETERMINATE, f"**kwargs expansion may set {param}")

    binding = bind_arguments(defn, call)
    if binding.mismatch:
        return MatchOutcome(Verdict.NO_MATCH, binding.mismatch)
    source = binding.sources[param]
    if source is not BindSource.UNBOUND:
        return MatchOutcome(Verdict.SAFE, f"{param} passed {'by keyword' if source is BindSource.KEYWORD else 'positionally'}")
    if call.star_args_index is not None and _positionally_reachable(defn, call.star_args_index):
        return MatchOutcome(Verdict.INDETERMINATE, f"*args expansion may reach {param}")
    return MatchOutcome(Verdict.VULNERABLE, f"{param} not passed; relies on the default")


def scan_client(parsed: ParsedUnit, defs: Sequence[DabcDefinition],
                include_safe: bool = False) -> List[VulnerableCall]:
    if not defs:
        raise ValueError("scan_client needs at least one DABC definition")
    by_callable: Dict[str, List[DabcDefinition]] = defaultdict(list)
    for defn in defs:
        by_callable[defn.callable_name].append(defn)

    results: List[VulnerableCall] = []
    for call in parsed.calls:
        for defn in by_callable.get(call.callee_name, ()):
            outcome = match_call(defn, call, parsed.identifiers)
            if outcome.verdict is Verdict.NO_MATCH:
                continue
            if outcome.verdict is Verdict.SAFE and not include_safe:
                continue
            results.append(VulnerableCall(defn.record, call, outcome.verdict, outcome.reason))
    results.sort(key=lambda r: r.sort_key)
    return results


def client_rollup(rows: Iterable[Mapping]) -> List[Dict[str, object]]:
    """Per-client verdict counts from report rows, sorted by path."""
    counts: Dict[str, Dict[str, int]] = {}
    for row in rows:
        entry = counts.setdefault(row["path"], {v.value: 0 for v in (Verdict.VULNERABLE, Verdict.INDETERMINATE, Verdict.SAFE)})
        entry[row["verdict"]] += 1
    return [
        {"path": path, "vulnerable_calls": c["vulnerable"], "indeterminate_calls": c["indeterminate"],
         "safe_calls": c["safe"], "vulnerable": c["vulnerable"] > 0}
        for path, c in sorted(counts.items())
    ]
