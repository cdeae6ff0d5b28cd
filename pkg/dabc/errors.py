"""
Error Types

Exceptions raised by the loaders, parsers and validators. Corpus loops catch the
per-unit ones and keep going; the input-validation ones abort a command before
it writes anything.
"""
from typing import Optional


class DabcError(Exception):
    """Base class for every error raised by the toolkit."""


class UnitLoadError(DabcError):
    def __init__(self, path: str, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class UnitParseError(DabcError):
    def __init__(self, path: str, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class DatabaseError(DabcError):
    """A DABC database or scan report line failed schema validation."""

    def __init__(self, path: str, line: Optional[int], reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


class TagManifestError(DabcError):
    def __init__(self, path: str, line: Optional[int], reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


class MappingError(DabcError):
    def __init__(self, path: str, reason: str):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{self.path}: {reason}")


class VersionParseError(DabcError, ValueError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"Malformed version string: {raw!r}")


class DegenerateInputError(DabcError, ValueError):
    """Correlation is undefined for the given vectors."""
