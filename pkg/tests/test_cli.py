import json
import subprocess
import sys

import pytest

from opforge import cli
from opforge.suites import SUITES, Check


def run_main(argv, capsys):
    code = cli.main(argv)
    return code, capsys.readouterr()


def test_empty_report_serializes_exactly():
    assert cli.report_serialize(cli.SuiteReport()) == b'{"checks":[]}'


def test_report_is_sorted_and_compact():
    rep = cli.SuiteReport([Check("b", "pass"), Check("a", "fail", "w")])
    data = cli.report_serialize(rep)
    assert b" " not in data
    names = [c["name"] for c in json.loads(data)["checks"]]
    assert names == ["a", "b"]


def test_text_format_has_one_line_per_check():
    rep = cli.SuiteReport([Check("x", "pass"), Check("y", "reported", "note")])
    lines = cli.report_serialize(rep, "text").decode().splitlines()
    assert len(lines) == 2 and lines[1].startswith("REPORTED")


def test_check_passes_with_exit_zero(capsys):
    code, out = run_main(["check", "--suite", "basis-count", "--max-arity", "3", "--emit", "json"], capsys)
    assert code == 0
    checks = json.loads(out.out)["checks"]
    assert checks and all(c["status"] == "pass" for c in checks)


def test_failing_check_exits_one(capsys, monkeypatch):
    monkeypatch.setitem(SUITES, "ce", lambda cfg: [Check("ce/forced", "fail", "forced")])
    code, out = run_main(["check", "--suite", "ce", "--emit", "json"], capsys)
    assert code == 1
    assert json.loads(out.out)["checks"][0]["status"] == "fail"


def test_reported_checks_do_not_fail(capsys, monkeypatch):
    monkeypatch.setitem(SUITES, "ce", lambda cfg: [Check("ce/note", "reported")])
    code, _ = run_main(["check", "--suite", "ce"], capsys)
    assert code == 0


def test_crashing_suite_becomes_a_failing_check(capsys, monkeypatch):
    def boom(cfg):
        raise RuntimeError("boom")
    monkeypatch.setitem(SUITES, "ce", boom)
    code, out = run_main(["check", "--suite", "ce", "--emit", "json"], capsys)
    assert code == 1
    assert "boom" in out.out


@pytest.mark.parametrize("argv", [
    ["check", "--preset", "nonsense"],
    ["check", "--max-arity", "0"],
    ["check", "--suite", "nonsense"],
    ["def", "--target", "End(V)", "--map", "nonsense"],
    ["frobnicate"],
])
def test_usage_errors_exit_two(argv, capsys):
    try:
        code = cli.main(argv)
    except SystemExit as ex:  # argparse reports its own errors this way
        code = ex.code
    assert code == 2


def test_bad_thread_count_is_a_usage_error(capsys, monkeypatch):
    monkeypatch.setenv("OPFORGE_THREADS", "many")
    code, _ = run_main(["check", "--suite", "basis-count"], capsys)
    assert code == 2


def test_output_is_independent_of_thread_count(capsys, monkeypatch):
    argv = ["check", "--suite", "basis-count", "--suite", "hopf", "--suite", "ce", "--emit", "json"]
    outs = []
    for n in ("1", "4"):
        monkeypatch.setenv("OPFORGE_THREADS", n)
        code, out = run_main(argv, capsys)
        assert code == 0
        outs.append(out.out)
    assert outs[0] == outs[1]


def test_out_file_matches_stdout(tmp_path, capsys):
    argv = ["check", "--suite", "phi", "--emit", "json"]
    _, out = run_main(argv, capsys)
    path = tmp_path / "r.json"
    code, quiet = run_main(argv + ["--out", str(path)], capsys)
    assert code == 0 and quiet.out == ""
    assert path.read_bytes() + b"\n" == out.out.encode()


def test_def_subcommand_emits_complex(capsys):
    code, out = run_main(["def", "--max-arity", "2", "--emit", "json"], capsys)
    assert code == 0
    (check,) = json.loads(out.out)["checks"]
    assert check["data"]["square_zero"] is True


def test_homology_of_cobar_koszul(capsys):
    code, out = run_main(["homology", "--complex", "cobar-koszul", "--max-arity", "3", "--emit", "json"], capsys)
    assert code == 0
    totals = [c["data"]["total"] for c in json.loads(out.out)["checks"]]
    assert totals == [1, 2, 6]


def test_experiment_is_reported(capsys):
    code, out = run_main(["experiment", "--emit", "json"], capsys)
    assert code == 0
    assert {c["status"] for c in json.loads(out.out)["checks"]} == {"reported"}


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "opforge.cli", "check", "--suite", "basis-count",
                        "--max-arity", "2", "--emit", "json"], capture_output=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["checks"]
