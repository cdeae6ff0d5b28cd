"""
Directive Mining

Scans a library checkout for `.. versionchanged::` docstring directives,
attributes each one to a function and parameter, prefilters the kind of change
and assembles DABC records.
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from joblib import Parallel, delayed

from .errors import UnitParseError
from .pyparse import ParsedUnit, SourceUnit, UnitKind, discover_sources, parse_unit, source_lines

logger = logging.getLogger(__name__)

DIRECTIVE_RE = re.compile(r"\.\. versionchanged:: .+")
ISSUE_REF_RE = re.compile(r"#(\d+)")

_SECTION_UNDERLINE_RE = re.compile(r"^\s*-{3,}\s*$")
_PARAM_HEADER_RE = re.compile(r"^(?P<indent>\s*)\*{0,2}(?P<name>[A-Za-z_]\w*)(?:\s*,\s*\*{0,2}[A-Za-z_]\w*)*\s+:(?!:)")
_PARAMETER_SECTIONS = {"parameters", "other parameters", "keyword arguments"}

# Lookahead shared by both default-change patterns: the new value ends before
# "in version X", a sentence break, a parenthesis or the end of the text.
_VALUE_END = r"(?=\s+in\s+(?:version\s+)?v?\d|\s*[.;,](?:\s|$)|\s+\(|\s*$)"
_DEFAULT_CHANGED_RE = re.compile(
    r"\bdefault\b.*?\bchanged?\s+from\s+(?P<old>.+?)\s+to\s+(?P<new>.+?)" + _VALUE_END,
    re.IGNORECASE,
)
_CHANGED_DEFAULT_RE = re.compile(
    r"\bchanged?\s+(?:the|its)\s+default(?:\s+value)?(?:\s+(?:of|for)\s+\S+)?"
    r"\s+from\s+(?P<old>.+?)\s+to\s+(?P<new>.+?)" + _VALUE_END,
    re.IGNORECASE,
)
_MENTIONS_DEFAULT_RE = re.compile(r"\bdefaults?\b", re.IGNORECASE)
_TYPE_CHANGE_RE = re.compile(
    r"\b(?:accepts?|accepted|supports?|supported|added|adds|allows?|allowed|now\s+takes?|can\s+(?:now\s+)?be)\b"
    r".*?\b(?:float|floats|integers?|int|str|strings?|bool|booleans?|array-like|arrays?|lists?|tuples?|"
    r"dicts?|callables?|sparse|None)\b",
    re.IGNORECASE,
)
_SENTENCE_BREAK_RE = re.compile(r"(?<=[.;])\s+(?=[A-Z])")

MODULE_FUNCTION = "<module>"


class ChangeKind(str, Enum):
    DEFAULT_VALUE_CHANGE = "default_value_change"
    TYPE_CHANGE = "type_change"
    OTHER = "other"
    NEEDS_REVIEW = "needs_review"


class Reason(str, Enum):
    NEW_FEATURE = "NewFeature"
    API_COMPATIBILITY = "ApiCompatibility"
    MAINTAINABILITY = "Maintainability"
    BUG_FIXING = "BugFixing"


class Effect(str, Enum):
    AESTHETICS = "Aesthetics"
    BEHAVIOR = "Behavior"
    PERFORMANCE = "Performance"
    REFACTORING = "Refactoring"


class Attribution(str, Enum):
    FUNCTION = "function"
    CLASS_CONSTRUCTOR = "class_constructor"
    CLASS_UNRESOLVED = "class_unresolved"
    MODULE = "module"
    UNPARSED = "unparsed"


@dataclass(frozen=True)
class DirectiveHit:
    path: str
    line: int
    version: str
    description: str
    enclosing_function: Optional[Tuple[Optional[str], str]] = None
    enclosing_param: Optional[str] = None
    attribution: Attribution = Attribution.MODULE
    parse_warning: Optional[str] = None


@dataclass(frozen=True)
class ChangeClassification:
    kind: ChangeKind
    old_default: Optional[str] = None
    new_default: Optional[str] = None


# Key order of one DABC database line.
RECORD_KEYS = ("dabc_msg", "version", "path", "class", "function", "argument", "dabc_url",
               "change_kind", "old_default", "new_default", "reason", "effect")


@dataclass
class DabcRecord:
    dabc_msg: str
    version: str
    path: str
    class_name: Optional[str]
    function_name: str
    argument: Optional[str]
    dabc_url: str
    change_kind: ChangeKind
    old_default: Optional[str] = None
    new_default: Optional[str] = None
    reason: Optional[Reason] = None
    effect: Optional[Effect] = None

    @property
    def fqn(self) -> Tuple[Optional[str], str, Optional[str]]:
        return (self.class_name, self.function_name, self.argument)

    @property
    def dabc_id(self) -> str:
        name = f"{self.class_name}.{self.function_name}" if self.class_name else self.function_name
        return f"{name}({self.argument})" if self.argument else name

    @property
    def labels(self) -> Optional[Tuple[Optional[Reason], Optional[Effect]]]:
        if self.reason is None and self.effect is None:
            return None
        return (self.reason, self.effect)

    def to_dict(self) -> Dict[str, str]:
        values = {
            "dabc_msg": self.dabc_msg,
            "version": self.version,
            "path": self.path,
            "class": self.class_name,
            "function": self.function_name,
            "argument": self.argument,
            "dabc_url": self.dabc_url,
            "change_kind": self.change_kind.value,
            "old_default": self.old_default,
            "new_default": self.new_default,
            "reason": self.reason.value if self.reason else None,
            "effect": self.effect.value if self.effect else None,
        }
        return {key: values[key] for key in RECORD_KEYS if values[key] is not None}


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip())


def _strip_closing_quotes(text: str) -> Tuple[str, bool]:
    for quote in ('"""', "'''"):
        if text.endswith(quote):
            return text[: -len(quote)].rstrip(), True
    return text, False


def directive_version(line: str) -> str:
    rest = line.split("versionchanged::", 1)[1]
    return rest.strip() or rest


def directive_body(lines: List[str], index: int) -> str:
    """Description text of the directive on `lines[index]`.

    The body is the block indented deeper than the directive, ending at the
    first line indented no deeper or at two consecutive blank lines. Without
    such a block, the next same-indentation paragraph is used.
    """
    depth = _indent(lines[index])
    body: List[str] = []
    blank_run = 0
    for line in lines[index + 1:]:
        if not line.strip():
            blank_run += 1
            if blank_run >= 2:
                break
            continue
        if _indent(line) <= depth:
            break
        blank_run = 0
        text, closed = _strip_closing_quotes(line.strip())
        if text:
            body.append(text)
        if closed:
            break
    if body:
        return " ".join(body)

    # flattened layout
    for line in lines[index + 1:]:
        stripped = line.strip()
        if (not stripped or _indent(line) != depth or stripped.startswith(".. ")
                or _SECTION_UNDERLINE_RE.match(line)):
            break
        text, closed = _strip_closing_quotes(stripped)
        if text:
            body.append(text)
        if closed:
            break
    return " ".join(body)


def enclosing_param(lines: List[str], index: int, doc_start: int) -> Optional[str]:
    """Parameter whose numpydoc entry holds the directive on `lines[index]`.

    `doc_start` is the 1-based first line of the docstring. The nearest
    `name : ...` header above the directive and less indented than it wins,
    provided it sits inside a Parameters-style section.
    """
    depth = _indent(lines[index])
    candidate: Optional[str] = None
    for j in range(index - 1, max(doc_start - 1, 0) - 1, -1):
        line = lines[j]
        if _SECTION_UNDERLINE_RE.match(line) and j > 0 and lines[j - 1].strip():
            if candidate is None:
                return None
            section = lines[j - 1].strip().lower()
            return candidate if section in _PARAMETER_SECTIONS else None
        if candidate is None:
            header = _PARAM_HEADER_RE.match(line)
            if header and len(header.group("indent")) < depth:
                candidate = header.group("name")
    return None


def _innermost(spans, line: int):
    """Item whose doc_span holds `line`, preferring the latest start."""
    best = None
    for item in spans:
        span = item.doc_span
        if span and span[0] <= line <= span[1]:
            if best is None or span[0] > best.doc_span[0]:
                best = item
    return best


def _attribute(parsed: ParsedUnit, lines: List[str], index: int):
    line = index + 1
    function = _innermost(parsed.defs, line)
    klass = _innermost(parsed.classes, line)
    if function is not None and (klass is None or function.doc_span[0] >= klass.doc_span[0]):
        param = enclosing_param(lines, index, function.doc_span[0])
        return (function.class_name, function.function_name), param, Attribution.FUNCTION

    if klass is not None:
        param = enclosing_param(lines, index, klass.doc_span[0])
        constructor = next((d for d in parsed.defs
                            if d.class_name == klass.name and d.function_name == "__init__"), None)
        if param and constructor is not None and constructor.param(param) is not None:
            return (klass.name, "__init__"), param, Attribution.CLASS_CONSTRUCTOR
        return (klass.name, "__init__"), param, Attribution.CLASS_UNRESOLVED

    return None, None, Attribution.MODULE


def scan_file(path: Union[str, Path], rel_path: str) -> List[DirectiveHit]:
    """Directive hits of one source file, in line order."""
    try:
        text = Path(path).read_bytes().decode("utf-8", errors="replace")
    except OSError as e:
        logger.warning("%s: unreadable file: %s", rel_path, e.strerror or e)
        return []

    lines = source_lines(text)
    indices = [i for i, line in enumerate(lines) if DIRECTIVE_RE.search(line)]
    if not indices:
        return []

    parsed: Optional[ParsedUnit] = None
    warning: Optional[str] = None
    try:
        parsed = parse_unit(SourceUnit(path=rel_path, kind=UnitKind.SCRIPT, code=text))
    except UnitParseError as e:
        warning = e.reason
        logger.warning("%s: %s; %d directive(s) left unattributed", rel_path, e.reason, len(indices))

    hits = []
    for index in indices:
        if parsed is None:
            function, param, attribution = None, None, Attribution.UNPARSED
        else:
            function, param, attribution = _attribute(parsed, lines, index)
        hits.append(DirectiveHit(
            path=rel_path,
            line=index + 1,
            version=directive_version(lines[index]),
            description=directive_body(lines, index),
            enclosing_function=function,
            enclosing_param=param if function is not None else None,
            attribution=attribution,
            parse_warning=warning,
        ))
    return hits


def scan_directives(root: Union[str, Path], jobs: int = 1) -> List[DirectiveHit]:
    """Every `.. versionchanged::` line in the `.py` files under root."""
    root = Path(root)
    paths = discover_sources(root, (".py",))
    batches = Parallel(n_jobs=jobs)(
        delayed(scan_file)(path, path.relative_to(root).as_posix()) for path in paths
    )
    hits = [hit for batch in batches for hit in batch]
    hits.sort(key=lambda h: (h.path, h.line))
    return hits


def _strip_literal(text: str) -> str:
    text = text.strip()
    for marker in ("``", "`", "*"):
        while len(text) > 2 * len(marker) and text.startswith(marker) and text.endswith(marker):
            text = text[len(marker):-len(marker)].strip()
    return text


def classify_change(description: str, has_param: bool = True) -> ChangeClassification:
    """Prefilter a directive description into a change kind.

    Anything not confidently a default change or a type change is left as
    needs_review for a human.
    """
    if not has_param:
        return ChangeClassification(ChangeKind.OTHER)
    text = " ".join((description or "").split())
    # patterns never span sentences
    sentences = _SENTENCE_BREAK_RE.split(text)
    for sentence in sentences:
        for pattern in (_DEFAULT_CHANGED_RE, _CHANGED_DEFAULT_RE):
            match = pattern.search(sentence)
            if match:
                return ChangeClassification(ChangeKind.DEFAULT_VALUE_CHANGE,
                                            old_default=_strip_literal(match.group("old")),
                                            new_default=_strip_literal(match.group("new")))
    if _MENTIONS_DEFAULT_RE.search(text):
        return ChangeClassification(ChangeKind.NEEDS_REVIEW)
    if any(_TYPE_CHANGE_RE.search(sentence) for sentence in sentences):
        return ChangeClassification(ChangeKind.TYPE_CHANGE)
    return ChangeClassification(ChangeKind.NEEDS_REVIEW)


def build_dabc_url(url_base: str, path: str, line: Optional[int]) -> str:
    url = f"{url_base.rstrip('/')}/{path}"
    return f"{url}#L{line}" if line is not None else url


def parse_dabc_url(url: str, url_base: Optional[str] = None) -> Tuple[str, Optional[int]]:
    """Recover (path, line) from a record URL."""
    location, _, anchor = url.partition("#")
    line = int(anchor[1:]) if anchor.startswith("L") and anchor[1:].isdigit() else None
    if url_base is not None:
        prefix = url_base.rstrip("/") + "/"
        if not location.startswith(prefix):
            raise ValueError(f"URL {url!r} does not start with {prefix!r}")
        return location[len(prefix):], line
    match = re.search(r"/(?:blob|tree)/[^/]+/(.+)$", location)
    if match is None:
        raise ValueError(f"Cannot find a source path in URL {url!r}")
    return match.group(1), line


def build_record(hit: DirectiveHit, kind: Union[ChangeKind, ChangeClassification], url_base: str) -> DabcRecord:
    classification = kind if isinstance(kind, ChangeClassification) else ChangeClassification(kind)
    change_kind = classification.kind

    if hit.enclosing_function is None:
        change_kind = ChangeKind.OTHER
    elif hit.enclosing_param is None and change_kind is ChangeKind.DEFAULT_VALUE_CHANGE:
        change_kind = ChangeKind.NEEDS_REVIEW
    elif hit.attribution is Attribution.CLASS_UNRESOLVED and change_kind is not ChangeKind.OTHER:
        change_kind = ChangeKind.NEEDS_REVIEW

    class_name, function_name = hit.enclosing_function or (None, MODULE_FUNCTION)
    keeps_defaults = change_kind is ChangeKind.DEFAULT_VALUE_CHANGE
    return DabcRecord(
        dabc_msg=hit.description or f".. versionchanged:: {hit.version}",
        version=hit.version,
        path=hit.path,
        class_name=class_name,
        function_name=function_name,
        argument=hit.enclosing_param if change_kind is not ChangeKind.OTHER else None,
        dabc_url=build_dabc_url(url_base, hit.path, hit.line),
        change_kind=change_kind,
        old_default=classification.old_default if keeps_defaults else None,
        new_default=classification.new_default if keeps_defaults else None,
    )


@dataclass
class MineResult:
    hits: List[DirectiveHit]
    records: List[DabcRecord]
    warnings: List[str] = field(default_factory=list)


def mine_library(root: Union[str, Path], url_base: str, jobs: int = 1) -> MineResult:
    """Scan, classify and build records for a whole checkout."""
    hits = scan_directives(root, jobs=jobs)
    records = []
    warnings = []
    for hit in hits:
        if hit.parse_warning:
            warnings.append(f"{hit.path}:{hit.line}: {hit.parse_warning}")
        classification = classify_change(hit.description, has_param=hit.enclosing_param is not None)
        records.append(build_record(hit, classification, url_base))
    logger.info("Mined %d directive(s) from %s", len(hits), root)
    return MineResult(hits=hits, records=records, warnings=warnings)


def extract_issue_refs(commit_message: str) -> List[int]:
    """Issue numbers (`#1234`) in order of first appearance."""
    refs: List[int] = []
    for number in ISSUE_REF_RE.findall(commit_message or ""):
        value = int(number)
        if value not in refs:
            refs.append(value)
    return refs
