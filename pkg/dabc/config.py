"""
Run Configuration

Environment defaults (loaded from `.env`), bundled data locations and the
validated `RunConfig` every CLI command is built from.
"""
import os
from pathlib import Path
from typing import List, Literal, Optional, Set

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from .releases import POLICIES

load_dotenv()

BASE_DIR = Path(__file__).resolve().parents[1]
INFRA_DIR = BASE_DIR / "infra"
MAPPINGS_DIR = INFRA_DIR / "mappings"
DATASETS_DIR = INFRA_DIR / "datasets"
SIGNATURES_DIR = INFRA_DIR / "signatures"
TAGS_DIR = INFRA_DIR / "tags"

DEFAULT_URL_BASE = "https://github.com/scikit-learn/scikit-learn/blob/1.1.2"
OUTPUT_FORMATS = ("csv", "json", "markdown")
COMMANDS = ("mine", "sigdiff", "scan", "report", "stats")

# Import token checked by `scan`/`stats` when --library is not given.
LIBRARY_TOKENS = {"sklearn": "sklearn", "pandas": "pandas", "numpy": "numpy"}


def env_flag(name: str) -> bool:
    return bool(os.getenv(name, "").strip())


def env_default(name: str, fallback: str) -> str:
    value = os.getenv(name, "").strip()
    return value or fallback


def bundled_file(directory: Path, policy: str, suffix: str) -> Optional[Path]:
    candidate = directory / f"{policy}{suffix}"
    return candidate if candidate.exists() else None


class RunConfig(BaseModel):
    command: Literal["mine", "sigdiff", "scan", "report", "stats"]
    library_root: Optional[Path] = None
    old_root: Optional[Path] = None
    new_root: Optional[Path] = None
    corpus_root: Optional[Path] = None
    dabc_db: Optional[Path] = None
    calls_file: Optional[Path] = None
    tags_file: Optional[Path] = None
    mapping_file: Optional[Path] = None
    output_dir: Path = Path("dabc-out")
    policy: str = "sklearn"
    formats: Set[str] = Field(default_factory=lambda: {"csv", "json"})
    jobs: int = 1
    seed: int = 0
    iterations: int = 1000
    import_match_mode: Literal["component", "substring"] = "component"
    include_safe: bool = False
    url_base: str = DEFAULT_URL_BASE
    library_token: Optional[str] = None
    verbose: bool = False

    @field_validator("formats")
    @classmethod
    def _known_formats(cls, value: Set[str]) -> Set[str]:
        unknown = sorted(value - set(OUTPUT_FORMATS))
        if unknown:
            raise ValueError(f"unknown output format(s): {', '.join(unknown)}")
        if not value:
            raise ValueError("at least one output format is required")
        return value

    @field_validator("jobs")
    @classmethod
    def _positive_jobs(cls, value: int) -> int:
        if value < 1:
            raise ValueError("jobs must be >= 1")
        return value

    @field_validator("iterations")
    @classmethod
    def _enough_iterations(cls, value: int) -> int:
        if value < 100:
            raise ValueError("iterations must be >= 100")
        return value

    @field_validator("policy")
    @classmethod
    def _known_policy(cls, value: str) -> str:
        if value not in POLICIES:
            raise ValueError(f"unknown policy {value!r}; expected one of {', '.join(sorted(POLICIES))}")
        return value

    @model_validator(mode="after")
    def _required_inputs(self) -> "RunConfig":
        """Check every input the command reads before anything is written."""
        problems: List[str] = []

        def need_dir(value: Optional[Path], flag: str):
            if value is None:
                problems.append(f"{flag} is required for '{self.command}'")
            elif not value.is_dir():
                problems.append(f"{flag} {value} is not a directory")

        def need_file(value: Optional[Path], flag: str, required: bool = True):
            if value is None:
                if required:
                    problems.append(f"{flag} is required for '{self.command}'")
            elif not value.is_file():
                problems.append(f"{flag} {value} does not exist")

        if self.command == "mine":
            need_dir(self.library_root, "--library-root")
        elif self.command == "sigdiff":
            need_dir(self.old_root, "--old-root")
            need_dir(self.new_root, "--new-root")
            need_file(self.dabc_db, "--db", required=False)
        elif self.command == "scan":
            need_dir(self.corpus_root, "--corpus")
            need_file(self.dabc_db, "--db")
            if self.library_root is not None:
                need_dir(self.library_root, "--library-root")
            if self.import_token is None:
                problems.append(f"--library is required with policy {self.policy!r}")
        elif self.command == "report":
            need_file(self.dabc_db, "--db")
            need_file(self.calls_file, "--calls", required=False)
            need_file(self.tags_file, "--tags", required=False)
            need_file(self.mapping_file, "--mapping", required=False)
        elif self.command == "stats":
            need_dir(self.corpus_root, "--corpus")
            if self.calls_file is None and self.dabc_db is None:
                problems.append("stats needs --calls or --db")
            need_file(self.calls_file, "--calls", required=False)
            need_file(self.dabc_db, "--db", required=False)
            if self.import_token is None:
                problems.append(f"--library is required with policy {self.policy!r}")

        if self.output_dir.exists() and not self.output_dir.is_dir():
            problems.append(f"--out {self.output_dir} exists and is not a directory")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def import_token(self) -> Optional[str]:
        return self.library_token or LIBRARY_TOKENS.get(self.policy)

    def resolved_mapping(self) -> Optional[Path]:
        return self.mapping_file or bundled_file(MAPPINGS_DIR, self.policy, ".json")

    def resolved_tags(self) -> Optional[Path]:
        return self.tags_file or bundled_file(TAGS_DIR, self.policy, ".csv")

    def bundled_signatures(self) -> Optional[Path]:
        candidate = SIGNATURES_DIR / self.policy
        return candidate if candidate.is_dir() else None
