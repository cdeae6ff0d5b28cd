"""
Python Source Front-End

Loads Python-3 scripts and Jupyter notebooks into one parsed representation:
imports, function definitions with their default-argument expressions and
docstrings, external call sites and the identifier set of the unit.
"""
import ast
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

from .errors import UnitLoadError, UnitParseError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SUPPORTED_EXTENSIONS = (".py", ".ipynb")
MAGIC_PREFIXES = ("%", "!", "?")
SKIPPED_DIRS = {"__pycache__", ".ipynb_checkpoints", ".git", ".hg", ".tox", ".venv"}

_LINE_BREAK = re.compile(r"\r\n|\r|\n")


class UnitKind(str, Enum):
    SCRIPT = "script"
    NOTEBOOK = "notebook"


class ParamKind(str, Enum):
    POSITIONAL_ONLY = "positional_only"
    POSITIONAL_OR_KEYWORD = "positional_or_keyword"
    KEYWORD_ONLY = "keyword_only"
    VARARG = "vararg"
    KWVARARG = "kwvararg"


POSITIONAL_KINDS = (ParamKind.POSITIONAL_ONLY, ParamKind.POSITIONAL_OR_KEYWORD)

CellRange = Tuple[int, Tuple[int, int]]


@dataclass(frozen=True)
class SourceUnit:
    path: str
    kind: UnitKind
    code: str
    cell_map: Tuple[CellRange, ...] = ()  # (cell_index, (first_line, last_line)), 1-based inclusive

    def cell_for_line(self, line: int) -> Optional[int]:
        for cell_index, (start, end) in self.cell_map:
            if start <= line <= end:
                return cell_index
        return None


@dataclass(frozen=True)
class ImportRecord:
    module_path: str
    alias: Optional[str]
    imported_names: Tuple[Tuple[str, Optional[str]], ...]
    line: int

    def bound_names(self) -> List[str]:
        """Names this import introduces into the unit's namespace."""
        if self.imported_names:
            return [alias or name for name, alias in self.imported_names]
        if self.alias:
            return [self.alias]
        return [self.module_path.split(".")[0]]


@dataclass(frozen=True)
class ParamSpec:
    name: str
    default_expr: Optional[str]
    kind: ParamKind = ParamKind.POSITIONAL_OR_KEYWORD

    @property
    def has_default(self) -> bool:
        return self.default_expr is not None


@dataclass(frozen=True)
class FunctionDef:
    function_name: str
    class_name: Optional[str]
    params: Tuple[ParamSpec, ...]
    docstring: Optional[str]
    span: Tuple[int, int]
    doc_span: Optional[Tuple[int, int]] = None
    decorators: Tuple[str, ...] = ()

    @property
    def key(self) -> str:
        return f"{self.class_name}.{self.function_name}" if self.class_name else self.function_name

    def param(self, name: str) -> Optional[ParamSpec]:
        for p in self.params:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class ClassInfo:
    name: str
    span: Tuple[int, int]
    docstring: Optional[str]
    doc_span: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class CallSite:
    callee_name: str
    receiver_text: Optional[str]
    positional_args: Tuple[str, ...]
    keyword_args: Dict[str, str]
    has_star_args: bool
    has_star_kwargs: bool
    path: str
    line: int
    column: int = 0
    cell: Optional[int] = None
    star_args_index: Optional[int] = None

    @property
    def location(self) -> Tuple[str, int, Optional[int]]:
        return (self.path, self.line, self.cell)

    @property
    def qualified_text(self) -> str:
        return f"{self.receiver_text}.{self.callee_name}" if self.receiver_text else self.callee_name

    @property
    def receiver_head(self) -> Optional[str]:
        if not self.receiver_text:
            return None
        match = re.match(r"[A-Za-z_][A-Za-z0-9_]*", self.receiver_text)
        return match.group(0) if match else None


@dataclass
class ParsedUnit:
    unit: SourceUnit
    imports: List[ImportRecord]
    defs: List[FunctionDef]
    classes: List[ClassInfo]
    calls: List[CallSite]
    local_calls: List[CallSite]
    identifiers: FrozenSet[str]
    partial: bool = False
    trees: List[ast.Module] = field(default_factory=list, compare=False, repr=False)

    @property
    def local_names(self) -> Set[str]:
        return {d.function_name for d in self.defs} | {c.name for c in self.classes}

    def imported_names(self) -> Set[str]:
        names: Set[str] = set()
        for record in self.imports:
            names.update(record.bound_names())
        return names


def source_lines(code: str) -> List[str]:
    """Split code into lines the way the Python tokenizer counts them."""
    if not code:
        return []
    lines = _LINE_BREAK.split(code)
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def is_magic_line(line: str) -> bool:
    return line.lstrip().startswith(MAGIC_PREFIXES)


class _LineContinuation:
    """Tracks open brackets, open strings and backslash joins across lines.

    A line only starts a new statement when all three are closed.
    """

    def __init__(self) -> None:
        self.depth = 0
        self.quote: Optional[str] = None
        self.joined = False

    @property
    def at_statement_start(self) -> bool:
        return not self.depth and self.quote is None and not self.joined

    def feed(self, line: str) -> None:
        self.joined = False
        i, n = 0, len(line)
        while i < n:
            ch = line[i]
            if self.quote is not None:
                if ch == "\\":
                    if i == n - 1:
                        self.joined = True
                    i += 2
                    continue
                if line.startswith(self.quote, i):
                    i += len(self.quote)
                    self.quote = None
                    continue
                i += 1
                continue
            if ch == "#":
                return
            if ch in "'\"":
                self.quote = ch * 3 if line.startswith(ch * 3, i) else ch
                i += len(self.quote)
                continue
            if ch in "([{":
                self.depth += 1
            elif ch in ")]}":
                self.depth = max(0, self.depth - 1)
            elif ch == "\\" and i == n - 1:
                self.joined = True
            i += 1
        # an unterminated single-quoted string ends with its line
        if self.quote in ("'", '"') and not self.joined:
            self.quote = None


def strip_magics(lines: Iterable[str]) -> List[str]:
    """Drop IPython magic and shell lines that start a statement; keep continuation lines."""
    state = _LineContinuation()
    kept: List[str] = []
    for line in lines:
        if state.at_statement_start and is_magic_line(line):
            continue
        kept.append(line)
        state.feed(line)
    return kept


def load_unit(path: PathLike, label: Optional[str] = None) -> SourceUnit:
    """Read a `.py` script or `.ipynb` notebook into a SourceUnit.

    `label` is recorded as the unit path (defaults to the path itself).
    """
    path = Path(path)
    label = label if label is not None else str(path)
    suffix = path.suffix.lower()
    if suffix not in SUPPORTED_EXTENSIONS:
        raise UnitLoadError(label, f"unsupported extension {suffix or '(none)'}")
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise UnitLoadError(label, f"unreadable file: {e.strerror or e}")

    text = raw.decode("utf-8", errors="replace")
    if suffix == ".py":
        return SourceUnit(path=label, kind=UnitKind.SCRIPT, code=text)
    return _load_notebook(label, text)


def _load_notebook(label: str, text: str) -> SourceUnit:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise UnitLoadError(label, f"malformed notebook JSON: {e.msg} at line {e.lineno}")

    cells = document.get("cells") if isinstance(document, dict) else None
    if not isinstance(cells, list):
        raise UnitLoadError(label, "malformed notebook JSON: no top-level 'cells' array")

    lines: List[str] = []
    cell_map: List[CellRange] = []
    for cell_index, cell in enumerate(cells):
        if not isinstance(cell, dict) or cell.get("cell_type") != "code":
            continue
        source = cell.get("source", "")
        if isinstance(source, list):
            source = "".join(str(part) for part in source)
        elif not isinstance(source, str):
            raise UnitLoadError(label, f"malformed notebook JSON: cell {cell_index} source is not text")

        kept = strip_magics(source_lines(source))
        if not kept:
            continue
        start = len(lines) + 1
        lines.extend(kept)
        cell_map.append((cell_index, (start, len(lines))))

    code = "\n".join(lines) + "\n" if lines else ""
    return SourceUnit(path=label, kind=UnitKind.NOTEBOOK, code=code, cell_map=tuple(cell_map))


def _dotted_name(node: ast.AST) -> Optional[str]:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        head = _dotted_name(node.value)
        return f"{head}.{node.attr}" if head else node.attr
    if isinstance(node, ast.Call):
        return _dotted_name(node.func)
    return None


def _docstring_span(node: ast.AST) -> Optional[Tuple[int, int]]:
    body = getattr(node, "body", None)
    if not body:
        return None
    first = body[0]
    if (isinstance(first, ast.Expr) and isinstance(first.value, ast.Constant)
            and isinstance(first.value.value, str)):
        return (first.lineno, first.end_lineno or first.lineno)
    return None


class _UnitVisitor(ast.NodeVisitor):
    """Collects imports, definitions, calls and identifiers from one parsed chunk."""

    def __init__(self, unit: SourceUnit, source: str):
        self.unit = unit
        self.source = source
        self.imports: List[ImportRecord] = []
        self.defs: List[FunctionDef] = []
        self.classes: List[ClassInfo] = []
        self.calls: List[CallSite] = []
        self.identifiers: Set[str] = set()
        self._scopes: List[Tuple[str, str]] = []
        self._fstring_depth = 0

    def _text(self, node: ast.AST) -> str:
        segment = ast.get_source_segment(self.source, node)
        return segment if segment is not None else ast.unparse(node)

    def visit_Import(self, node: ast.Import):
        for alias in node.names:
            self.imports.append(ImportRecord(module_path=alias.name, alias=alias.asname,
                                             imported_names=(), line=node.lineno))
        self.generic_visit(node)

    def visit_ImportFrom(self, node: ast.ImportFrom):
        module_path = "." * (node.level or 0) + (node.module or "")
        names = tuple((a.name, a.asname) for a in node.names if a.name != "*")
        self.imports.append(ImportRecord(module_path=module_path, alias=None,
                                         imported_names=names, line=node.lineno))
        if node.module:
            self.identifiers.update(part for part in node.module.split(".") if part)
        self.generic_visit(node)

    def visit_alias(self, node: ast.alias):
        if node.name != "*":
            self.identifiers.update(part for part in node.name.split(".") if part)
        if node.asname:
            self.identifiers.add(node.asname)

    def visit_ClassDef(self, node: ast.ClassDef):
        self.identifiers.add(node.name)
        self.classes.append(ClassInfo(name=node.name, span=(node.lineno, node.end_lineno or node.lineno),
                                      docstring=ast.get_docstring(node),
                                      doc_span=_docstring_span(node)))
        self._scopes.append(("class", node.name))
        self.generic_visit(node)
        self._scopes.pop()

    def _visit_function(self, node):
        self.identifiers.add(node.name)
        class_name = self._scopes[-1][1] if self._scopes and self._scopes[-1][0] == "class" else None
        decorators = tuple(name for name in (_dotted_name(d) for d in node.decorator_list) if name)
        self.defs.append(FunctionDef(
            function_name=node.name,
            class_name=class_name,
            params=self._params(node.args),
            docstring=ast.get_docstring(node),
            span=(node.lineno, node.end_lineno or node.lineno),
            doc_span=_docstring_span(node),
            decorators=decorators,
        ))
        self._scopes.append(("function", node.name))
        self.generic_visit(node)
        self._scopes.pop()

    visit_FunctionDef = _visit_function
    visit_AsyncFunctionDef = _visit_function

    def _params(self, args: ast.arguments) -> Tuple[ParamSpec, ...]:
        positional = list(args.posonlyargs) + list(args.args)
        first_default = len(positional) - len(args.defaults)
        params: List[ParamSpec] = []
        for index, arg in enumerate(positional):
            default = args.defaults[index - first_default] if index >= first_default else None
            kind = ParamKind.POSITIONAL_ONLY if index < len(args.posonlyargs) else ParamKind.POSITIONAL_OR_KEYWORD
            params.append(ParamSpec(arg.arg, self._text(default) if default is not None else None, kind))
        if args.vararg is not None:
            params.append(ParamSpec(args.vararg.arg, None, ParamKind.VARARG))
        for arg, default in zip(args.kwonlyargs, args.kw_defaults):
            params.append(ParamSpec(arg.arg, self._text(default) if default is not None else None,
                                    ParamKind.KEYWORD_ONLY))
        if args.kwarg is not None:
            params.append(ParamSpec(args.kwarg.arg, None, ParamKind.KWVARARG))
        return tuple(params)

    def visit_Call(self, node: ast.Call):
        func = node.func
        callee: Optional[str] = None
        receiver: Optional[str] = None
        if isinstance(func, ast.Name):
            callee = func.id
        elif isinstance(func, ast.Attribute):
            callee = func.attr
            receiver = self._text(func.value)

        if callee is not None and not self._fstring_depth:
            positional: List[str] = []
            star_index: Optional[int] = None
            for index, arg in enumerate(node.args):
                if isinstance(arg, ast.Starred) and star_index is None:
                    star_index = index
                positional.append(self._text(arg))
            keywords: Dict[str, str] = {}
            star_kwargs = False
            for kw in node.keywords:
                if kw.arg is None:
                    star_kwargs = True
                else:
                    keywords[kw.arg] = self._text(kw.value)
            self.calls.append(CallSite(
                callee_name=callee,
                receiver_text=receiver,
                positional_args=tuple(positional),
                keyword_args=keywords,
                has_star_args=star_index is not None,
                has_star_kwargs=star_kwargs,
                path=self.unit.path,
                line=node.lineno,
                column=node.col_offset,
                cell=self.unit.cell_for_line(node.lineno),
                star_args_index=star_index,
            ))
        self.generic_visit(node)

    def visit_JoinedStr(self, node: ast.JoinedStr):
        # calls inside f-string fields are not reported; names still count
        self._fstring_depth += 1
        self.generic_visit(node)
        self._fstring_depth -= 1

    def visit_Name(self, node: ast.Name):
        self.identifiers.add(node.id)

    def visit_Attribute(self, node: ast.Attribute):
        self.identifiers.add(node.attr)
        self.generic_visit(node)

    def visit_arg(self, node: ast.arg):
        self.identifiers.add(node.arg)
        self.generic_visit(node)

    def visit_keyword(self, node: ast.keyword):
        if node.arg:
            self.identifiers.add(node.arg)
        self.generic_visit(node)

    def visit_Global(self, node: ast.Global):
        self.identifiers.update(node.names)

    visit_Nonlocal = visit_Global


def _parse_cells(unit: SourceUnit) -> List[Tuple[ast.Module, str]]:
    """Parse each notebook cell on its own, keeping original line numbers."""
    lines = source_lines(unit.code)
    chunks: List[Tuple[ast.Module, str]] = []
    for cell_index, (start, end) in unit.cell_map:
        # Pad with blank lines so node positions match the concatenated unit.
        source = "\n" * (start - 1) + "\n".join(lines[start - 1:end]) + "\n"
        try:
            chunks.append((ast.parse(source, filename=unit.path), source))
        except (SyntaxError, ValueError) as e:
            logger.debug("%s: cell %d skipped: %s", unit.path, cell_index, e)
    return chunks


def parse_unit(unit: SourceUnit) -> ParsedUnit:
    """Extract imports, definitions, external calls and identifiers from a unit.

    Notebooks that fail to parse as a whole are retried cell by cell; the
    result is flagged `partial`.
    """
    partial = False
    try:
        chunks = [(ast.parse(unit.code, filename=unit.path), unit.code)]
    except (SyntaxError, ValueError) as e:
        reason = f"syntax error: {getattr(e, 'msg', e)} (line {getattr(e, 'lineno', '?')})"
        if unit.kind is not UnitKind.NOTEBOOK or not unit.cell_map:
            raise UnitParseError(unit.path, reason)
        chunks = _parse_cells(unit)
        if not chunks:
            raise UnitParseError(unit.path, f"{reason}; no cell parses on its own")
        partial = True
        logger.warning("%s: %s; kept %d of %d cells", unit.path, reason, len(chunks), len(unit.cell_map))

    imports: List[ImportRecord] = []
    defs: List[FunctionDef] = []
    classes: List[ClassInfo] = []
    calls: List[CallSite] = []
    identifiers: Set[str] = set()
    for tree, source in chunks:
        visitor = _UnitVisitor(unit, source)
        visitor.visit(tree)
        imports.extend(visitor.imports)
        defs.extend(visitor.defs)
        classes.extend(visitor.classes)
        calls.extend(visitor.calls)
        identifiers.update(visitor.identifiers)

    local_names = {d.function_name for d in defs} | {c.name for c in classes}
    calls.sort(key=lambda c: (c.line, c.column))
    return ParsedUnit(
        unit=unit,
        imports=imports,
        defs=defs,
        classes=classes,
        calls=[c for c in calls if c.callee_name not in local_names],
        local_calls=[c for c in calls if c.callee_name in local_names],
        identifiers=frozenset(identifiers),
        partial=partial,
        trees=[tree for tree, _ in chunks],
    )


def unit_imports_library(parsed: ParsedUnit, library_token: str, mode: str = "component") -> bool:
    """True iff the unit imports something from `library_token`.

    `component` compares dotted-path components; `substring` reproduces the
    looser substring query over module paths.
    """
    if not library_token:
        raise ValueError("library_token must be non-empty")
    for record in parsed.imports:
        if mode == "substring":
            if library_token in record.module_path:
                return True
        elif library_token in record.module_path.split("."):
            return True
    return False


def discover_sources(root: PathLike, extensions: Iterable[str] = SUPPORTED_EXTENSIONS) -> List[Path]:
    """Sorted list of source files under root, skipping hidden and cache dirs."""
    root = Path(root)
    wanted = tuple(ext.lower() for ext in extensions)
    found = []
    for path in root.rglob("*"):
        if not path.is_file() or path.suffix.lower() not in wanted:
            continue
        parents = path.relative_to(root).parts[:-1]
        if any(part in SKIPPED_DIRS or part.startswith(".") for part in parents):
            continue
        found.append(path)
    return sorted(found, key=lambda p: p.relative_to(root).as_posix())


def discover_units(root: PathLike) -> List[Path]:
    return discover_sources(root, SUPPORTED_EXTENSIONS)
