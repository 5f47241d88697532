import io

import pytest

from mpmrs.cli import cmd_table, main
from mpmrs.engine import parse_system, write_system
from mpmrs.examples import data_text
from mpmrs.machine import parse_machine, u22, u22_patched, write_machine
from mpmrs.universal import u23_repaired, u23_system


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_run_rm_builtin():
    code, text = run("run-rm", "move", "--inputs", "2,3")
    assert code == 0 and "halted" in text and "[5, 0]" in text


def test_run_rm_bound_exit():
    code, text = run("run-rm", "u22", "--max-steps", "5")
    assert code == 3 and "bound reached" in text


def test_compile_roundtrips(tmp_path):
    code, text = run("compile", "parity", "--passes", "p1,p3", "--inputs", "3,0")
    assert code == 0
    sys_ = parse_system(text)
    assert write_system(sys_) == text
    f = tmp_path / "p.mprs"
    f.write_text(text)
    code, out = run("run-mpmrs", str(f), "--exhaustive")
    assert code == 0 and "complete=True" in out


def test_run_mpmrs_example1():
    code, text = run("run-mpmrs", "example1", "--exhaustive")
    assert code == 0
    assert "stable A C F^2 | terminal F^2" in text
    assert "stable B D^2 | terminal λ" in text


def test_verify_exit_codes():
    assert run("verify", "move", "--inputs", "2,3;0,0", "--passes", "p1,p2,p3,p4")[0] == 0
    code, text = run("verify", "u22", "--frozen", "--calibrated", "--passes", "p1,p2")
    assert code == 0 and "overall: equivalent" in text


def test_universal_canonical_reports_finding():
    code, text = run("universal", "--max-steps", "200")
    assert code == 1 and text.startswith("finding: ") and "at step 35" in text


def test_universal_repaired_runs():
    code, text = run("universal", "--repaired", "--inputs", "0,0,0,1")
    assert code == 0 and "R1 =" in text


def test_diagram_dot():
    code, text = run("diagram", "example1", "--format", "dot", "--simplify")
    assert code == 0 and text.startswith("digraph")
    assert text.count("r2 / -E") == 3


def test_stats():
    assert run("stats", "u23")[1].strip() == "rules 23, max size 19"
    code, text = run("stats", "u22", "--passes", "p1,p2", "--calibrated")
    assert code == 0 and "rules 56, max size 5" in text


def test_table_rows():
    text = cmd_table()
    lines = text.splitlines()
    assert any(line.startswith("P0 ") and "3 | 73 | match" in line for line in lines)
    assert any("≤20 | 23 | match" in line for line in lines)
    assert "published 6 | 47 matched: yes" in text


def test_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.rm"
    bad.write_text("@registers 1\n@start q0\n@final qf\nq0 JUMP qf\nqf STOP\n")
    code, _ = run("run-rm", str(bad))
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error: ") and "line 4" in err
    assert run("verify", "move")[0] == 2
    with pytest.raises(SystemExit):
        run("no-such-command")


def test_shipped_data_files():
    assert parse_machine(data_text("u22.rm")) == u22()
    assert parse_machine(data_text("u22-patched-q27.rm")) == u22_patched("q27")
    assert parse_system(data_text("u23.mprs")) == u23_system()
    assert parse_system(data_text("u23-repaired.mprs")) == u23_repaired()
    for name in ("u22.rm", "u22-patched.rm"):
        text = data_text(name)
        assert write_machine(parse_machine(text)) == text
