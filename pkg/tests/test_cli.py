import shutil
from pathlib import Path

import pytest

from conftest import FIXTURES
from lgiosc.cli import main
import lgiosc.laws

SMOKE = FIXTURES / "scenarios" / "smoke.scn"
TRACES = FIXTURES / "traces"


def test_run_prints_trace(capsys):
    assert main(["run", str(SMOKE)]) == 0
    out = capsys.readouterr().out
    assert out == (TRACES / "smoke.trace").read_text()


def test_run_with_trace_reports(tmp_path, capsys):
    out = tmp_path / "smoke.trace"
    assert main(["run", str(SMOKE), "--trace", str(out)]) == 0
    assert out.read_text() == (TRACES / "smoke.trace").read_text()
    tsv = capsys.readouterr().out.splitlines()
    assert tsv[0] == "section\tname\tstatus\tcount\tentries"
    assert sum(line.startswith("check\t") for line in tsv) == 14


def test_check_passes_on_clean_trace(capsys):
    assert main(["check", str(TRACES / "two_law.trace")]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_check_fails_on_forged_trace(tmp_path, capsys):
    text = (TRACES / "r15_dm_arrived.trace").read_text()
    forged = text.replace("carol), env(2), [], [], dm_arrived",
                          "carol), env(2), [deliver(alice, hello, carol)], [], dm_arrived", 1)
    assert forged != text
    bad = tmp_path / "bad.trace"
    bad.write_text(forged)
    assert main(["check", str(bad), "--details"]) == 1
    cap = capsys.readouterr()
    assert "check\tgroup_isolation\tFAIL" in cap.out
    assert "group_isolation" in cap.err


def test_suite_subset(capsys):
    assert main(["check", str(TRACES / "smoke.trace"), "--suite", "trust,names"]) == 0
    checks = [line.split("\t")[1] for line in capsys.readouterr().out.splitlines() if line.startswith("check\t")]
    assert checks == ["trust", "names"]


def test_unknown_suite_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["check", str(TRACES / "smoke.trace"), "--suite", "bogus"])
    assert exc.value.code == 2
    assert "unknown checks" in capsys.readouterr().err


def test_figures(tmp_path):
    figs = tmp_path / "figs"
    assert main(["check", str(TRACES / "search7.trace"), "--figures", str(figs)]) == 0
    names = {p.name for p in figs.iterdir()}
    assert names == {"report.tsv", "violations.tsv", "checks.png", "envelopes.png", "activity.png"}
    for png in figs.glob("*.png"):
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert (figs / "violations.tsv").read_text().count("\n") == 1


def test_missing_file_is_exit_2(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.trace")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bad_scenario_is_exit_2(tmp_path, capsys):
    scn = tmp_path / "bad.scn"
    scn.write_text("frobnicate(alice)\n")
    assert main(["run", str(scn)]) == 2


def test_fmt_prints_and_checks(tmp_path, capsys):
    src = Path(lgiosc.laws.__file__).parent / "be.law"
    law = tmp_path / "be.law"
    shutil.copy(src, law)
    assert main(["fmt", str(law)]) == 0
    canonical = capsys.readouterr().out
    assert main(["fmt", str(law), "--check"]) == 1  # shipped file carries comments
    assert main(["fmt", str(law), "--write"]) == 0
    assert law.read_text() == canonical
    assert main(["fmt", str(law), "--check"]) == 0


def test_fmt_rejects_bad_law(tmp_path, capsys):
    law = tmp_path / "x.law"
    law.write_text("law(x).\nrule r: arrived(X, M, Y :- do(deliver).\n")
    assert main(["fmt", str(law)]) == 2
