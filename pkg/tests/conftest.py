import json
from pathlib import Path

import pytest

from dabc.config import DATASETS_DIR, SIGNATURES_DIR
from dabc.database import DabcDatabase
from dabc.matcher import build_definitions
from dabc.pyparse import SourceUnit, UnitKind, parse_unit
from dabc.sigdiff import snapshot

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def write_file(tmp_path):
    """Write `text` to tmp_path/<rel> and return the path."""
    def _write(rel: str, text: str) -> Path:
        path = tmp_path / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path
    return _write


@pytest.fixture
def notebook_text():
    def _build(*cells) -> str:
        return json.dumps({
            "cells": [{"cell_type": kind, "metadata": {}, "source": source} for kind, source in cells],
            "metadata": {},
            "nbformat": 4,
            "nbformat_minor": 5,
        })
    return _build


@pytest.fixture
def parse_code():
    def _parse(code: str, path: str = "client.py"):
        return parse_unit(SourceUnit(path=path, kind=UnitKind.SCRIPT, code=code))
    return _parse


@pytest.fixture(scope="session")
def sklearn_records():
    return DabcDatabase(DATASETS_DIR / "sklearn.jsonl").load()


@pytest.fixture(scope="session")
def sklearn_definitions(sklearn_records):
    return build_definitions(sklearn_records, [snapshot(SIGNATURES_DIR / "sklearn", "bundled:sklearn")])
