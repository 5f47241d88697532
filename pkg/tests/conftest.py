import pytest

from mpmrs.examples import example1, m_copy, m_move, m_parity


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def small_machines():
    return {"move": m_move(), "copy": m_copy(), "parity": m_parity()}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
