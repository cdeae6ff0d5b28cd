import io
import json
import logging
import shutil
import sys

import pandas as pd
import pytest

from dabc.config import DATASETS_DIR
from dabc.main import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, LevelColorFormatter, configure_logging, main

SKLEARN_DB = DATASETS_DIR / "sklearn.jsonl"


@pytest.fixture(autouse=True)
def reset_package_logger():
    yield
    package_logger = logging.getLogger("dabc")
    package_logger.handlers.clear()
    package_logger.setLevel(logging.NOTSET)


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture
def corpus(tmp_path, fixtures_dir, notebook_text):
    root = tmp_path / "corpus"
    (root / "clients").mkdir(parents=True)
    shutil.copy(fixtures_dir / "clients" / "dabc_example.py", root / "clients" / "dabc_example.py")
    (root / "analysis.ipynb").write_text(
        notebook_text(("code", "import pandas as pd\ndf = pd.concat([a, b])\n")), encoding="utf-8")
    (root / "broken.py").write_text("import sklearn\ndef broken(:\n", encoding="utf-8")
    return root


def test_mine_writes_database_and_summary(fixtures_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["mine", "--library-root", str(fixtures_dir / "library"), "--out", str(out)]) == EXIT_OK
    [row] = read_jsonl(out / "dabcs.jsonl")
    assert row["dabc_url"].endswith("sklearn/svm/_classes.py#L24")
    assert row["change_kind"] == "default_value_change"
    summary = read_json(out / "mine_summary.json")
    assert summary["hits"] == summary["records"] == 1
    assert summary["parse_warnings"] == []


def test_mine_empty_library(tmp_path):
    (tmp_path / "library").mkdir()
    out = tmp_path / "out"
    assert main(["mine", "--library-root", str(tmp_path / "library"), "--out", str(out)]) == EXIT_OK
    assert (out / "dabcs.jsonl").read_text(encoding="utf-8") == ""
    assert read_json(out / "mine_summary.json")["records"] == 0


def test_mine_with_unparseable_file_exits_partial(fixtures_dir, tmp_path):
    library = tmp_path / "library"
    shutil.copytree(fixtures_dir / "library", library)
    (library / "broken.py").write_text(
        'def f(:\n    """\n    .. versionchanged:: 1.1\n       Default changed from 1 to 2.\n    """\n',
        encoding="utf-8")
    out = tmp_path / "out"
    assert main(["mine", "--library-root", str(library), "--out", str(out)]) == EXIT_PARTIAL
    assert len(read_jsonl(out / "dabcs.jsonl")) == 2
    assert len(read_json(out / "mine_summary.json")["parse_warnings"]) == 1


def test_sigdiff_reconciles_against_mined_database(fixtures_dir, tmp_path):
    out = tmp_path / "out"
    main(["mine", "--library-root", str(fixtures_dir / "library"), "--out", str(out)])
    code = main(["sigdiff", "--old-root", str(fixtures_dir / "sigdiff" / "old"),
                 "--new-root", str(fixtures_dir / "sigdiff" / "new"),
                 "--db", str(out / "dabcs.jsonl"), "--out", str(out)])
    assert code == EXIT_OK
    payload = read_json(out / "sigdiff.json")
    assert (payload["old"], payload["new"]) == ("old", "new")
    assert payload["summary"] == {"documented": 1, "undocumented": 0, "doc_only": 0}
    assert payload["documented"][0]["argument"] == "gamma"


@pytest.mark.parametrize("argv", [
    ["mine"],
    ["frobnicate"],
    ["mine", "--library-root", "{tmp}", "--format", "xml"],
    ["mine", "--library-root", "{tmp}", "--jobs", "0"],
    ["scan", "--corpus", "{tmp}", "--db", "{tmp}/missing.jsonl"],
    ["scan", "--corpus", "{tmp}", "--db", str(SKLEARN_DB), "--policy", "semver"],
    ["report", "--db", str(SKLEARN_DB), "--policy", "cran"],
    ["stats", "--corpus", "{tmp}"],
])
def test_invalid_arguments_exit_fatal_without_output(tmp_path, argv):
    out = tmp_path / "out"
    args = [a.replace("{tmp}", str(tmp_path)) for a in argv] + ["--out", str(out)]
    assert main(args) == EXIT_FATAL
    assert not out.exists()


def test_help_exits_ok(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "mine" in capsys.readouterr().out


def test_scan_reports_vulnerable_calls(corpus, tmp_path):
    out = tmp_path / "out"
    code = main(["scan", "--corpus", str(corpus), "--db", str(SKLEARN_DB), "--out", str(out)])
    assert code == EXIT_PARTIAL

    rows = read_jsonl(out / "vulnerable_calls.jsonl")
    assert [(r["dabc_id"], r["path"], r["line"], r["verdict"]) for r in rows] == [
        ("SVC.__init__(decision_function_shape)", "clients/dabc_example.py", 16, "vulnerable"),
        ("SVC.__init__(gamma)", "clients/dabc_example.py", 16, "vulnerable"),
    ]
    frame = pd.read_csv(out / "vulnerable_calls.csv")
    assert frame["dabc_id"].tolist() == [r["dabc_id"] for r in rows]
    clients = pd.read_csv(out / "clients.csv")
    assert clients.to_dict("records") == [{"path": "clients/dabc_example.py", "vulnerable_calls": 2,
                                           "indeterminate_calls": 0, "safe_calls": 0, "vulnerable": True}]

    summary = read_json(out / "scan_summary.json")
    assert summary["definitions"] == 15
    assert (summary["units_found"], summary["units_importing"], summary["units_skipped"]) == (3, 1, 1)
    assert summary["skipped"][0]["path"] == "broken.py"
    assert summary["skipped"][0]["reason"].startswith("syntax error")
    assert summary["vulnerable_clients"] == 1


def test_scan_notebook_with_continued_modulo_line(fixtures_dir, notebook_text, tmp_path):
    root = tmp_path / "corpus"
    root.mkdir()
    example = (fixtures_dir / "clients" / "dabc_example.py").read_text(encoding="utf-8")
    (root / "example.ipynb").write_text(notebook_text(("code", example)), encoding="utf-8")
    out = tmp_path / "out"
    assert main(["scan", "--corpus", str(root), "--db", str(SKLEARN_DB), "--out", str(out)]) == EXIT_OK

    rows = read_jsonl(out / "vulnerable_calls.jsonl")
    assert [(r["dabc_id"], r["path"], r["line"], r["cell"], r["verdict"]) for r in rows] == [
        ("SVC.__init__(decision_function_shape)", "example.ipynb", 16, 0, "vulnerable"),
        ("SVC.__init__(gamma)", "example.ipynb", 16, 0, "vulnerable"),
    ]
    summary = read_json(out / "scan_summary.json")
    assert summary["units_skipped"] == 0
    assert summary["skipped"] == []


def test_scan_with_library_token_override(corpus, tmp_path):
    out = tmp_path / "out"
    main(["scan", "--corpus", str(corpus), "--db", str(SKLEARN_DB), "--library", "pandas", "--out", str(out)])
    summary = read_json(out / "scan_summary.json")
    assert summary["library"] == "pandas"
    assert summary["units_importing"] == 1
    assert summary["vulnerable_calls"] == 0


def test_report_after_scan(corpus, tmp_path):
    scan_out = tmp_path / "scan"
    main(["scan", "--corpus", str(corpus), "--db", str(SKLEARN_DB), "--out", str(scan_out)])
    out = tmp_path / "report"
    code = main(["report", "--db", str(SKLEARN_DB), "--calls", str(scan_out / "vulnerable_calls.jsonl"),
                 "--out", str(out), "--format", "csv", "--markdown"])
    assert code == EXIT_OK
    for name in ("dabcs", "dabcs_by_version", "dabcs_by_module", "dabcs_by_argument",
                 "calls_by_dabc", "calls_by_version", "calls_by_module", "client_summary"):
        assert (out / f"{name}.csv").is_file()
        assert (out / f"{name}.md").is_file()
    assert not (out / "dabcs.json").exists()

    versions = pd.read_csv(out / "dabcs_by_version.csv", dtype={"version": str})
    assert versions.iloc[0]["version"] == "0.22"
    assert versions.iloc[0]["dabcs"] == 7
    summary = pd.read_csv(out / "client_summary.csv").set_index("metric")["value"]
    assert summary["clients_scanned"] == 1
    assert summary["vulnerable_calls"] == 2


def test_report_with_bad_calls_file_exits_fatal(tmp_path):
    calls = tmp_path / "calls.jsonl"
    calls.write_text('{"dabc_id": "x"}\n', encoding="utf-8")
    assert main(["report", "--db", str(SKLEARN_DB), "--calls", str(calls), "--out", str(tmp_path / "out")]) == EXIT_FATAL


def test_stats_correlates_size_with_vulnerable_calls(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for n in range(1, 11):
        (corpus / f"unit_{n:02d}.py").write_text("from sklearn.svm import SVC\n" + "clf = SVC()\n" * n,
                                                  encoding="utf-8")
    out = tmp_path / "out"
    code = main(["stats", "--corpus", str(corpus), "--db", str(SKLEARN_DB), "--iterations", "200",
                 "--out", str(out), "--format", "csv"])
    assert code == EXIT_OK

    table = pd.read_csv(out / "correlations.csv").set_index("metric")
    assert len(table) == 12
    assert table.loc["SLOC", "level"] == "very_high"
    assert table.loc["SLOC", "coefficient"] == pytest.approx(1.0)
    assert table.loc["Blank LOC", "level"] == "undefined"
    metrics = pd.read_csv(out / "unit_metrics.csv")
    assert metrics["vulnerable_calls"].tolist() == [2 * n for n in range(1, 11)]


def write_synthetic_corpus(root, notebook_text):
    for i in range(200):
        folder = root / f"group_{i % 7}"
        folder.mkdir(parents=True, exist_ok=True)
        cv = ", cv=5" if i % 3 else ""
        code = ("from sklearn.svm import SVC\nfrom sklearn.model_selection import cross_val_score\n"
                f"clf = SVC(C={i % 5 + 1}.0{', gamma=0.1' if i % 2 else ''})\n"
                f"scores = cross_val_score(clf, X, y{cv})\n")
        if i % 10 == 0:
            (folder / f"unit_{i:03d}.ipynb").write_text(notebook_text(("code", code)), encoding="utf-8")
        elif i % 11 == 0:
            (folder / f"unit_{i:03d}.py").write_text("import os\nos.getcwd()\n", encoding="utf-8")
        else:
            (folder / f"unit_{i:03d}.py").write_text(code, encoding="utf-8")


def test_scan_and_report_do_not_depend_on_jobs(tmp_path, notebook_text):
    corpus = tmp_path / "corpus"
    write_synthetic_corpus(corpus, notebook_text)
    outputs = []
    for run, jobs in enumerate(("1", "8", "8")):
        out = tmp_path / f"out{run}"
        assert main(["scan", "--corpus", str(corpus), "--db", str(SKLEARN_DB), "--jobs", jobs,
                     "--include-safe", "--out", str(out)]) == EXIT_OK
        assert main(["report", "--db", str(SKLEARN_DB), "--calls", str(out / "vulnerable_calls.jsonl"),
                     "--out", str(out / "report"), "--jobs", jobs, "--markdown"]) == EXIT_OK
        outputs.append({p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    assert outputs[0] == outputs[1] == outputs[2]
    assert {"vulnerable_calls.jsonl", "vulnerable_calls.csv", "clients.csv", "scan_summary.json",
            "report/calls_by_dabc.json", "report/client_summary.md"} <= set(outputs[0])
    summary = json.loads(outputs[0]["scan_summary.json"])
    assert summary["units_found"] == 200
    assert summary["vulnerable_calls"] > 0 and summary["safe_calls"] > 0


def test_level_color_formatter():
    record = logging.LogRecord("dabc.miner", logging.WARNING, __file__, 1, "skipped %s", ("a.py",), None)
    assert LevelColorFormatter(False).format(record) == "WARNING dabc.miner: skipped a.py"
    assert LevelColorFormatter(True).format(record) == "\033[33mWARNING\033[0m dabc.miner: skipped a.py"


class TtyBuffer(io.StringIO):
    def isatty(self):
        return True


def test_configure_logging_honours_environment(monkeypatch):
    monkeypatch.setattr(sys, "stderr", TtyBuffer())
    monkeypatch.delenv("DABC_NO_COLOR", raising=False)
    monkeypatch.delenv("DABC_LOG_LEVEL", raising=False)
    assert configure_logging().formatter.color is True
    assert logging.getLogger("dabc").level == logging.INFO

    monkeypatch.setenv("DABC_NO_COLOR", "1")
    monkeypatch.setenv("DABC_LOG_LEVEL", "warning")
    assert configure_logging().formatter.color is False
    assert logging.getLogger("dabc").level == logging.WARNING
    assert len(logging.getLogger("dabc").handlers) == 1

    monkeypatch.setenv("DABC_LOG_LEVEL", "chatty")
    configure_logging()
    assert logging.getLogger("dabc").level == logging.INFO
    configure_logging(verbose=True)
    assert logging.getLogger("dabc").level == logging.DEBUG
