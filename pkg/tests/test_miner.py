import os
import textwrap
from pathlib import Path

import pytest

from dabc.config import DEFAULT_URL_BASE, SIGNATURES_DIR
from dabc.miner import (DIRECTIVE_RE, Attribution, ChangeKind, DirectiveHit, build_record, classify_change,
                        directive_body, enclosing_param, extract_issue_refs, mine_library, parse_dabc_url,
                        scan_directives, scan_file)
from dabc.pyparse import source_lines

URL_BASE = "https://github.com/scikit-learn/scikit-learn/blob/1.1.2"


def test_directive_regex():
    assert DIRECTIVE_RE.search("        .. versionchanged:: 0.22")
    assert not DIRECTIVE_RE.search(".. versionchanged::")
    assert not DIRECTIVE_RE.search(".. versionadded:: 0.22")


def test_svc_gamma_docstring_yields_one_default_change(fixtures_dir):
    result = mine_library(fixtures_dir / "library", URL_BASE)
    assert result.warnings == []
    [hit] = result.hits
    assert hit.attribution is Attribution.CLASS_CONSTRUCTOR
    assert hit.line == 24

    [record] = result.records
    assert record.change_kind is ChangeKind.DEFAULT_VALUE_CHANGE
    assert record.fqn == ("SVC", "__init__", "gamma")
    assert record.version == "0.22"
    assert record.old_default == "'auto'"
    assert record.new_default == "'scale'"
    assert record.path == "sklearn/svm/_classes.py"
    assert record.dabc_msg == "The default value of ``gamma`` changed from 'auto' to 'scale'."
    assert record.dabc_url == f"{URL_BASE}/sklearn/svm/_classes.py#L24"
    assert record.dabc_id == "SVC.__init__(gamma)"


def test_bundled_svc_stub_mines_gamma_and_flags_the_vague_directive():
    result = mine_library(SIGNATURES_DIR / "sklearn", URL_BASE)
    by_arg = {r.argument: r for r in result.records}
    assert set(by_arg) == {"gamma", "decision_function_shape"}
    assert by_arg["gamma"].change_kind is ChangeKind.DEFAULT_VALUE_CHANGE
    # "is 'ovr' by default" names no previous value
    assert by_arg["decision_function_shape"].change_kind is ChangeKind.NEEDS_REVIEW
    assert by_arg["decision_function_shape"].version == "0.19"


def test_mining_runs_in_parallel_with_the_same_result():
    serial = scan_directives(SIGNATURES_DIR, jobs=1)
    parallel = scan_directives(SIGNATURES_DIR, jobs=2)
    assert serial == parallel
    assert [h.path for h in serial] == sorted(h.path for h in serial)


def test_directive_body_nested_block():
    lines = [
        "        .. versionchanged:: 0.20",
        "           first line",
        "           continues",
        "",
        "           second paragraph",
        "    next_param : int",
    ]
    assert directive_body(lines, 0) == "first line continues second paragraph"


def test_directive_body_stops_at_two_blank_lines():
    lines = [
        "    .. versionchanged:: 1.0",
        "       kept",
        "",
        "",
        "       dropped",
    ]
    assert directive_body(lines, 0) == "kept"


def test_directive_body_flattened_layout():
    lines = [
        "        .. versionchanged:: 1.2",
        "        Default changed from 0.5 to 1.0.",
        "        Second sentence.",
        "",
        "        Unrelated paragraph.",
    ]
    assert directive_body(lines, 0) == "Default changed from 0.5 to 1.0. Second sentence."


def test_directive_body_stops_at_closing_quotes():
    lines = [
        "    .. versionchanged:: 2.0",
        '       Now returns a copy."""',
        "    return x",
    ]
    assert directive_body(lines, 0) == "Now returns a copy."


def test_enclosing_param_needs_a_parameters_section():
    lines = source_lines(textwrap.dedent('''\
        """Summary.

        Parameters
        ----------
        alpha, beta : float
            Weights.

            .. versionchanged:: 0.3

        Returns
        -------
        out : ndarray
            Result.

            .. versionchanged:: 0.4
        """
        '''))
    first = next(i for i, line in enumerate(lines) if "0.3" in line)
    second = next(i for i, line in enumerate(lines) if "0.4" in line)
    assert enclosing_param(lines, first, 1) == "alpha"
    assert enclosing_param(lines, second, 1) is None


@pytest.mark.parametrize("description, kind, old, new", [
    ("The default value of ``gamma`` changed from 'auto' to 'scale'.", ChangeKind.DEFAULT_VALUE_CHANGE, "'auto'", "'scale'"),
    ("Default changed from 'ovr' to 'auto' in 0.22.", ChangeKind.DEFAULT_VALUE_CHANGE, "'ovr'", "'auto'"),
    ("``cv`` default value if None changed from 3-fold to 5-fold.", ChangeKind.DEFAULT_VALUE_CHANGE, "3-fold", "5-fold"),
    ("The default value of ``n_estimators`` changed from 10 to 100 in 0.22.", ChangeKind.DEFAULT_VALUE_CHANGE, "10", "100"),
    ("Changed the default value of ``solver`` from 'liblinear' to 'lbfgs'.", ChangeKind.DEFAULT_VALUE_CHANGE, "'liblinear'", "'lbfgs'"),
    ('`max_features` default changed from ``"auto"`` to ``"sqrt"``.', ChangeKind.DEFAULT_VALUE_CHANGE, '"auto"', '"sqrt"'),
    ("decision_function_shape is 'ovr' by default.", ChangeKind.NEEDS_REVIEW, None, None),
    ("Added float values for ``alpha``.", ChangeKind.TYPE_CHANGE, None, None),
    ("Renamed from ``foo``.", ChangeKind.NEEDS_REVIEW, None, None),
    ("The default is 'auto'. The output changed from a list to an array.", ChangeKind.NEEDS_REVIEW, None, None),
    ("Default is None. Changed from ndarray to sparse matrix output.", ChangeKind.NEEDS_REVIEW, None, None),
    ("Now returns a list instead of a tuple.", ChangeKind.NEEDS_REVIEW, None, None),
    ("Now accepts a callable as well as a string.", ChangeKind.TYPE_CHANGE, None, None),
    ("Output is sorted. Default changed from 1 to 2.", ChangeKind.DEFAULT_VALUE_CHANGE, "1", "2"),
])
def test_classify_change(description, kind, old, new):
    result = classify_change(description)
    assert (result.kind, result.old_default, result.new_default) == (kind, old, new)


def test_classify_change_without_a_parameter_is_other():
    assert classify_change("Default changed from 1 to 2.", has_param=False).kind is ChangeKind.OTHER


def test_build_record_without_function_is_other():
    hit = DirectiveHit(path="sklearn/__init__.py", line=3, version="0.24", description="Module reorganised.")
    record = build_record(hit, ChangeKind.TYPE_CHANGE, URL_BASE)
    assert record.change_kind is ChangeKind.OTHER
    assert record.function_name == "<module>"
    assert record.argument is None
    assert record.dabc_id == "<module>"


def test_build_record_downgrades_unresolved_attribution():
    hit = DirectiveHit(path="a.py", line=9, version="1.0", description="Default changed from 1 to 2.",
                       enclosing_function=("Thing", "__init__"), enclosing_param="size",
                       attribution=Attribution.CLASS_UNRESOLVED)
    record = build_record(hit, classify_change(hit.description), URL_BASE)
    assert record.change_kind is ChangeKind.NEEDS_REVIEW
    assert record.old_default is None
    assert record.argument == "size"


def test_unattributed_class_directive_needs_review(write_file, tmp_path):
    write_file("pkg/thing.py", textwrap.dedent('''\
        class Thing:
            """A thing.

            Parameters
            ----------
            size : int, default=2
                How big.

                .. versionchanged:: 1.0
                   Default changed from 1 to 2.
            """

            def __init__(self, **kwargs):
                pass
        '''))
    [record] = mine_library(tmp_path, URL_BASE).records
    assert record.fqn == ("Thing", "__init__", "size")
    assert record.change_kind is ChangeKind.NEEDS_REVIEW


def test_unparseable_file_keeps_hits_with_a_warning(write_file, tmp_path):
    write_file("broken.py", 'def f(:\n    """\n    .. versionchanged:: 1.1\n       Default changed from 1 to 2.\n    """\n')
    [hit] = scan_file(tmp_path / "broken.py", "broken.py")
    assert hit.attribution is Attribution.UNPARSED
    assert hit.description == "Default changed from 1 to 2."

    result = mine_library(tmp_path, URL_BASE)
    assert len(result.warnings) == 1
    assert result.records[0].change_kind is ChangeKind.OTHER


def test_url_round_trip():
    url = f"{URL_BASE}/sklearn/svm/_classes.py#L24"
    assert parse_dabc_url(url) == ("sklearn/svm/_classes.py", 24)
    assert parse_dabc_url(url, url_base=URL_BASE + "/") == ("sklearn/svm/_classes.py", 24)
    assert parse_dabc_url("https://github.com/pandas-dev/pandas/blob/v2.0.0/pandas/io/gbq.py") == ("pandas/io/gbq.py", None)
    with pytest.raises(ValueError):
        parse_dabc_url(url, url_base="https://example.org/repo")


def test_extract_issue_refs():
    assert extract_issue_refs("Fix #123 and #45 (see #123)") == [123, 45]
    assert extract_issue_refs("") == []


def test_record_to_dict_key_order(fixtures_dir):
    [record] = mine_library(fixtures_dir / "library", DEFAULT_URL_BASE).records
    assert list(record.to_dict()) == ["dabc_msg", "version", "path", "class", "function", "argument",
                                      "dabc_url", "change_kind", "old_default", "new_default"]


@pytest.mark.corpus
@pytest.mark.parametrize("env, subdir, expected", [
    ("DABC_SKLEARN_ROOT", "sklearn", 179),
    ("DABC_PANDAS_ROOT", "pandas", 126),
    ("DABC_NUMPY_ROOT", "numpy", 54),
])
def test_directive_counts_on_release_checkouts(env, subdir, expected):
    root = os.getenv(env)
    if not root:
        pytest.skip(f"{env} is not set")
    source = Path(root) / subdir
    assert len(scan_directives(source if source.is_dir() else Path(root), jobs=4)) == expected
