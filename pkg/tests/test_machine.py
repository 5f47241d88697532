import pytest
from hypothesis import given, strategies as st

from mpmrs.machine import (
    DECJZ,
    INC,
    Branch,
    DecJz,
    Inc,
    MachineError,
    MachineParseError,
    MalformedMachine,
    RegisterMachine,
    RmConfiguration,
    Stop,
    initial_configuration,
    machine_from_lines,
    parse_machine,
    rm_run,
    rm_step,
    rm_trace,
    u22,
    u22_patched,
    validate_machine,
    write_machine,
)
from mpmrs.examples import data_text, m_move


def regs(**kw):
    out = [0] * 8
    for k, v in kw.items():
        out[int(k[1:])] = v
    return tuple(out)


def test_u22_shape():
    m = u22()
    assert len(m.program) == 23  # 22 instructions plus the STOP at qf
    assert m.count(INC) == 9
    assert m.count(DECJZ) == 13
    assert m.registers == 8 and m.start == "q1" and m.final == "qf"
    assert m.program["q16"] == DecJz(5, "q18", "q23")
    assert m.program["q25"] == DecJz(0, "q1", "q32")
    assert m.program["q29"] == Inc(0, "q1")


def test_u22_steps():
    m = u22()
    assert rm_step(m, RmConfiguration("q1", regs(r1=5))) == RmConfiguration("q3", regs(r1=4))
    assert rm_step(m, RmConfiguration("q1", regs())) == RmConfiguration("q6", regs())
    assert rm_step(m, RmConfiguration("q3", regs())) == RmConfiguration("q1", regs(r7=1))
    assert rm_step(m, RmConfiguration("qf", regs())) is None


def test_u22_flags_q29():
    assert validate_machine(u22()) == ["unreachable state q29"]
    for site in ("q25", "q27"):
        assert validate_machine(u22_patched(site)) == []


def test_patched_variants():
    assert u22_patched().program["q25"] == DecJz(0, "q29", "q32")
    assert u22_patched("q27").program["q27"] == DecJz(3, "q32", "q29")
    with pytest.raises(MachineError):
        u22_patched("q1")


def test_move_machine():
    m = m_move()
    out = rm_run(m, (2, 3))
    assert out.halted and out.steps == 7
    assert out.config == RmConfiguration("qf", (5, 0))
    assert validate_machine(m) == []


def test_zero_budget():
    out = rm_run(m_move(), (2, 3), max_steps=0)
    assert not out.halted and out.config.state == "q0"


def test_trace_lengths():
    out = rm_run(m_move(), (1, 2), record=True)
    assert len(out.trace) == out.steps
    tr = rm_trace(m_move(), (1, 2), 100)
    assert tr[0] == RmConfiguration("q0", (1, 2)) and tr[-1].state == "qf"


def test_dec_and_branch():
    m = RegisterMachine.from_program({"a": Branch(0, "b", "qf"), "b": Inc(1, "qf")}, 2, "a", "qf")
    assert rm_run(m, (0, 0)).config.regs == (0, 0)
    assert rm_run(m, (3, 0)).config.regs == (3, 1)  # branch does not change the register
    from mpmrs.machine import Dec
    d = RegisterMachine.from_program({"a": Dec(0, "qf")}, 1, "a", "qf")
    with pytest.raises(MachineError):
        rm_step(d, initial_configuration(d, (0,)))


def test_missing_instruction_is_malformed():
    m = machine_from_lines(["a INC 0 b"], 1, "a", "qf")
    with pytest.raises(MalformedMachine):
        rm_run(m, (0,))


def test_validate_reports_duplicates_and_ranges():
    m = machine_from_lines(["a INC 0 qf", "a INC 1 qf", "b INC 5 qf", "qf STOP"], 2, "a", "qf")
    diags = validate_machine(m)
    assert any("determinism" in d for d in diags)
    assert any("out of range" in d for d in diags)
    assert any("unreachable state b" in d for d in diags)


def test_negative_registers_rejected():
    with pytest.raises(MachineError):
        RmConfiguration("q", (-1,))


def test_text_round_trip():
    text = data_text("u22.rm")
    assert parse_machine(text) == u22()
    assert write_machine(parse_machine(text)) == text
    assert parse_machine(data_text("u22-patched.rm")) == u22_patched("q25")
    assert parse_machine(data_text("u22-patched-q27.rm")) == u22_patched("q27")


@pytest.mark.parametrize("text,line", [
    ("@registers 2\n@start a\n@final qf\na JUMP 0 qf\n", 4),
    ("@registers x\n", 1),
    ("@registers 1\n@start a\n@final qf\na INC 0\n", 4),
])
def test_parse_errors(text, line):
    with pytest.raises(MachineParseError) as e:
        parse_machine(text)
    assert e.value.line == line


def test_missing_header():
    with pytest.raises(MachineParseError):
        parse_machine("a INC 0 qf\n")


@given(st.integers(0, 30), st.integers(0, 30))
def test_move_adds(a, b):
    out = rm_run(m_move(), (a, b))
    assert out.config.regs == (a + b, 0)
    assert out.steps == 2 * b + 1
