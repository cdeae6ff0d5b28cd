"""
Release Classification

Version parsing, per-library major/minor/patch policies, tag manifests and the
assignment of each DABC to the release that introduced it.
"""
import logging
import re
from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .errors import TagManifestError, VersionParseError

logger = logging.getLogger(__name__)

_VERSION_RE = re.compile(r"^v?(\d+)\.(\d+)(?:\.(\d+))?$")
_VERSION_IN_TEXT_RE = re.compile(r"(?<![\w.])v?(\d+)\.(\d+)(?:\.(\d+))?(?![\w])")


class Scheme(str, Enum):
    SUFFIX_MINOR = "suffix_minor"
    SEMVER_LOOSE = "semver_loose"
    NUMPY_STYLE = "numpy_style"


class ReleaseKind(str, Enum):
    MAJOR = "major"
    MINOR = "minor"
    PATCH = "patch"


@dataclass(frozen=True)
class VersionId:
    raw: str
    parts: Tuple[int, ...]

    @property
    def sort_key(self) -> Tuple[int, int, int]:
        return (self.parts[0], self.parts[1], self.parts[2] if len(self.parts) > 2 else -1)

    @property
    def prefix(self) -> Tuple[int, int]:
        return (self.parts[0], self.parts[1])

    def __str__(self) -> str:
        return ".".join(str(p) for p in self.parts)


@dataclass(frozen=True)
class ReleasePolicy:
    library: str
    scheme: Scheme


@dataclass(frozen=True)
class ReleaseTag:
    version: VersionId
    date: date
    kind: ReleaseKind


POLICIES: Dict[str, ReleasePolicy] = {
    "sklearn": ReleasePolicy("sklearn", Scheme.SUFFIX_MINOR),
    "pandas": ReleasePolicy("pandas", Scheme.SEMVER_LOOSE),
    "numpy": ReleasePolicy("numpy", Scheme.NUMPY_STYLE),
    "semver": ReleasePolicy("semver", Scheme.SEMVER_LOOSE),
}


def get_policy(name: str) -> ReleasePolicy:
    try:
        return POLICIES[name]
    except KeyError:
        raise ValueError(f"Unknown release policy {name!r}")


def parse_version(raw: str) -> VersionId:
    """Parse `X.Y[.Z]` with an optional leading `v`."""
    match = _VERSION_RE.match(raw.strip()) if isinstance(raw, str) else None
    if match is None:
        raise VersionParseError(raw)
    parts = tuple(int(g) for g in match.groups() if g is not None)
    return VersionId(raw=raw, parts=parts)


def version_from_text(text: str) -> VersionId:
    """First X.Y[.Z] found in free text such as a directive argument."""
    match = _VERSION_IN_TEXT_RE.search(text or "")
    if match is None:
        raise VersionParseError(text)
    return parse_version(match.group(0))


def classify_release(version: VersionId, policy: ReleasePolicy) -> ReleaseKind:
    if policy.scheme is Scheme.SUFFIX_MINOR:
        return ReleaseKind.MAJOR if len(version.parts) == 2 else ReleaseKind.MINOR

    patch = version.parts[2] if len(version.parts) > 2 else 0
    if patch > 0:
        return ReleaseKind.PATCH
    if version.parts[1] == 0:
        return ReleaseKind.MAJOR
    return ReleaseKind.MINOR


def make_tag(raw_version: str, released: date, policy: ReleasePolicy) -> ReleaseTag:
    version = parse_version(raw_version)
    return ReleaseTag(version=version, date=released, kind=classify_release(version, policy))


def load_tags(csv_path: Union[str, Path], policy: ReleasePolicy) -> List[ReleaseTag]:
    """Read a `version,date` manifest; rows are validated and sorted by version."""
    csv_path = Path(csv_path)
    try:
        frame = pd.read_csv(csv_path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TagManifestError(csv_path, None, f"unreadable manifest: {e}")

    frame.columns = [str(c).strip() for c in frame.columns]
    missing = {"version", "date"} - set(frame.columns)
    if missing:
        raise TagManifestError(csv_path, 1, f"missing column(s): {', '.join(sorted(missing))}")

    tags: List[ReleaseTag] = []
    seen: Dict[Tuple[int, ...], int] = {}
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + 2  # header is line 1
        raw_version = str(row.version).strip()
        try:
            version = parse_version(raw_version)
        except VersionParseError as e:
            raise TagManifestError(csv_path, line, str(e))
        try:
            released = date.fromisoformat(str(row.date).strip())
        except ValueError:
            raise TagManifestError(csv_path, line, f"invalid ISO-8601 date {row.date!r}")
        if version.parts in seen:
            raise TagManifestError(csv_path, line, f"duplicate version {raw_version} (first on line {seen[version.parts]})")
        seen[version.parts] = line
        tags.append(ReleaseTag(version=version, date=released, kind=classify_release(version, policy)))

    if not tags:
        raise TagManifestError(csv_path, None, "manifest has no tags")
    tags.sort(key=lambda t: t.version.sort_key)
    return tags


def assign_dabc_release(record, tags: Sequence[ReleaseTag], policy: ReleasePolicy) -> Optional[ReleaseTag]:
    """Release that introduced `record`, or None when no tag fits.

    Picks the smallest tag with the record's X.Y prefix that is not older than
    the record version. Under suffix_minor a two-part record version needs the
    exact two-part tag.
    """
    if not tags:
        raise ValueError("assign_dabc_release needs a non-empty tag list")
    try:
        wanted = version_from_text(record.version)
    except VersionParseError:
        logger.warning("%s: unparseable version %r, release unassigned", record.dabc_id, record.version)
        return None

    if policy.scheme is Scheme.SUFFIX_MINOR and len(wanted.parts) == 2:
        candidates = [t for t in tags if t.version.parts == wanted.parts]
    else:
        candidates = [t for t in tags
                      if t.version.prefix == wanted.prefix and t.version.sort_key >= wanted.sort_key]

    if not candidates:
        logger.warning("%s: no %s tag for version %s, release unassigned",
                       record.dabc_id, policy.library, record.version)
        return None
    return min(candidates, key=lambda t: t.version.sort_key)
