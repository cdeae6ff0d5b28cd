"""
DABC Database Storage

JSON Lines persistence for mined/curated DABC records and for scan reports.
Every line is validated on load; a bad line aborts with its line number.
"""
import json
import logging
from collections import Counter
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import DatabaseError
from .miner import ChangeKind, DabcRecord, Effect, Reason

logger = logging.getLogger(__name__)


class DabcRecordModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    dabc_msg: str
    version: str
    path: str
    class_name: Optional[str] = Field(default=None, alias="class")
    function: str
    argument: Optional[str] = None
    dabc_url: str
    change_kind: ChangeKind
    old_default: Optional[str] = None
    new_default: Optional[str] = None
    reason: Optional[Reason] = None
    effect: Optional[Effect] = None

    @field_validator("dabc_msg", "version", "path", "function", "dabc_url")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("must be non-empty")
        return value

    def to_record(self) -> DabcRecord:
        return DabcRecord(
            dabc_msg=self.dabc_msg,
            version=self.version,
            path=self.path,
            class_name=self.class_name,
            function_name=self.function,
            argument=self.argument,
            dabc_url=self.dabc_url,
            change_kind=self.change_kind,
            old_default=self.old_default,
            new_default=self.new_default,
            reason=self.reason,
            effect=self.effect,
        )


class CallRowModel(BaseModel):
    """One line of a vulnerable-calls report."""
    model_config = ConfigDict(extra="forbid")

    dabc_id: str
    path: str
    line: int
    cell: Optional[int] = None
    verdict: str
    reason: str
    receiver: Optional[str] = None

    @field_validator("verdict")
    @classmethod
    def _known_verdict(cls, value: str) -> str:
        if value not in ("vulnerable", "safe", "indeterminate"):
            raise ValueError(f"unknown verdict {value!r}")
        return value


def _first_error(error: ValidationError) -> str:
    detail = error.errors()[0]
    where = ".".join(str(part) for part in detail.get("loc", ())) or "line"
    return f"{where}: {detail.get('msg', 'invalid value')}"


def read_jsonl(path: Union[str, Path], model) -> List[BaseModel]:
    """Parse and validate a JSON Lines file against `model`; blank lines are skipped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DatabaseError(path, None, f"unreadable file: {e}")

    rows = []
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as e:
            raise DatabaseError(path, number, f"invalid JSON: {e.msg}")
        if not isinstance(payload, dict):
            raise DatabaseError(path, number, "expected a JSON object")
        try:
            rows.append(model.model_validate(payload))
        except ValidationError as e:
            raise DatabaseError(path, number, _first_error(e))
    return rows


def write_jsonl(path: Union[str, Path], rows: Iterable[Dict[str, Any]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


class DabcDatabase:
    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)

    def load(self) -> List[DabcRecord]:
        """Load every record; raises DatabaseError on the first invalid line."""
        if not self.path.exists():
            raise DatabaseError(self.path, None, "database file not found")
        records = [row.to_record() for row in read_jsonl(self.path, DabcRecordModel)]
        logger.debug("Loaded %d DABC record(s) from %s", len(records), self.path)
        return records

    def save(self, records: Iterable[DabcRecord]):
        write_jsonl(self.path, (record.to_dict() for record in records))

    def load_matchable(self) -> List[DabcRecord]:
        """Records that feed the matcher: confirmed default-value changes with an argument."""
        return [r for r in self.load()
                if r.change_kind is ChangeKind.DEFAULT_VALUE_CHANGE and r.argument]

    @staticmethod
    def summary(records: Iterable[DabcRecord]) -> Dict[str, Any]:
        records = list(records)
        counts = Counter(r.change_kind.value for r in records)
        return {
            "records": len(records),
            "change_kinds": {kind.value: counts.get(kind.value, 0) for kind in ChangeKind},
        }


def load_call_report(path: Union[str, Path]) -> List[CallRowModel]:
    return read_jsonl(path, CallRowModel)

