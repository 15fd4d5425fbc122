import os
import subprocess
import sys

import pytest

from blowup_alpha.cli import (
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    main,
    parse_config,
    read_artifact,
)


def run_to(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_dims_prints_twelve(capsys):
    assert main(["--command", "dims", "--param", "N=1"]) == EXIT_OK
    rows = [l for l in capsys.readouterr().out.splitlines() if not l.startswith("#")]
    assert rows[0].startswith("N,")
    assert rows[1].split(",")[1] == "12"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "blowup_alpha", "--command", "dims",
                           "--param", "N=2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert ",54," in proc.stdout


def test_case_table_supremum(tmp_path):
    code, out = run_to(tmp_path, "c.txt", "--command", "case-table", "--format", "structured-text")
    assert code == EXIT_OK
    _, status, body = read_artifact(out)
    assert status == "pass"
    assert "supremum = 1/3" in body


def test_alpha_scan_divergent(tmp_path):
    code, out = run_to(tmp_path, "a.csv", "--command", "alpha-scan", "--param", "alpha=0.37",
                       "--param", "phi=phi0")
    assert code == EXIT_OK
    assert "Divergent" in out.read_text()


def test_byte_identical_runs(tmp_path):
    args = ["--command", "mt-battery", "--param", "count=5", "--seed", "7"]
    _, out = run_to(tmp_path, "m.csv", *args)
    first = out.read_bytes()
    _, out = run_to(tmp_path, "m.csv", *args)
    assert out.read_bytes() == first


def test_seed_changes_battery(tmp_path):
    _, a = run_to(tmp_path, "a.csv", "--command", "mt-battery", "--param", "count=3", "--seed", "1")
    _, b = run_to(tmp_path, "b.csv", "--command", "mt-battery", "--param", "count=3", "--seed", "2")
    body = lambda p: read_artifact(p)[2]
    assert body(a) != body(b)


@pytest.mark.parametrize("fmt", ["csv", "structured-text"])
def test_header_round_trip(tmp_path, fmt):
    out = tmp_path / "g.out"
    argv = ["--command", "gram", "--param", "N=1", "--format", fmt, "--seed", "3",
            "--threads", "2", "--out", str(out)]
    cfg, _ = parse_config(argv)
    assert main(argv) == EXIT_OK
    got, _, _ = read_artifact(out)
    assert got == cfg
    assert got == RunConfig("gram", {"N": "1"}, str(out), fmt, 3, 2)


def test_empty_report(capsys):
    assert main(["--command", "report"]) == EXIT_OK
    assert "artifacts = 0" in capsys.readouterr().out


def test_report_lists_artifacts(tmp_path, capsys):
    _, a = run_to(tmp_path, "d.csv", "--command", "dims", "--param", "N=1,2")
    _, b = run_to(tmp_path, "c.csv", "--command", "case-table")
    capsys.readouterr()
    assert main(["--command", "report", str(a), str(b)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "artifacts = 2" in out and "all_pass = true" in out


def test_tampered_artifact_rejected(tmp_path):
    _, out = run_to(tmp_path, "d.csv", "--command", "dims", "--param", "N=1")
    text = out.read_text().replace("# seed: 0", "# seed: 1")
    out.write_text(text)
    assert main(["--command", "report", str(out)]) == EXIT_USAGE


def test_foreign_file_rejected(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n")
    assert main(["--command", "report", str(f)]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["--command", "dims", "--param", "N=0"],
    ["--command", "dims", "--param", "N=x"],
    ["--command", "dims", "--param", "bogus=1"],
    ["--command", "dims", "--param", "noequals"],
    ["--command", "nope"],
    ["--command", "hoelder", "--param", "eps1=0.5"],
    ["--command", "dims", "--threads", "0"],
])
def test_bad_parameters_exit_two(argv):
    assert main(argv) == EXIT_USAGE


def test_failed_check_is_nonzero(tmp_path):
    # a Convergent expectation at 0.37 contradicts the scan
    code, out = run_to(tmp_path, "a.csv", "--command", "alpha-scan", "--param", "alpha=0.37",
                       "--param", "expect=Convergent")
    assert code == EXIT_FAIL
    assert read_artifact(out)[1] == "fail"


def test_no_temp_files_left(tmp_path):
    run_to(tmp_path, "d.csv", "--command", "dims")
    assert sorted(os.listdir(tmp_path)) == ["d.csv"]
