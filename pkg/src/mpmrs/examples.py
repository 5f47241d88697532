"""Small systems and machines used in tests, docs and the CLI."""

from __future__ import annotations

from importlib import resources

from .engine import FsMpmrsSystem, parse_system
from .machine import RegisterMachine, parse_machine

EXAMPLE1 = """\
@alphabet A B C D E F
@registers E F
@terminal F
@init A^2 B E^2
r1: A B -> C
r2: A E -> D
r3: C D -> A^2 B F
"""

# moves R1 into R0
MOVE = """\
@registers 2
@start q0
@final qf
q0 DECJZ 1 q1 qf
q1 INC 0 q0
qf STOP
"""

# R0 += R1 and R2 += R1, emptying R1
COPY = """\
@registers 3
@start q0
@final qf
q0 DECJZ 1 q1 qf
q1 INC 0 q2
q2 INC 2 q0
qf STOP
"""

# R1 = R0 mod 2, emptying R0
PARITY = """\
@registers 2
@start q0
@final qf
q0 DECJZ 0 q1 qf
q1 DECJZ 0 q0 q2
q2 INC 1 qf
qf STOP
"""


def example1() -> FsMpmrsSystem:
    return parse_system(EXAMPLE1)


def m_move() -> RegisterMachine:
    return parse_machine(MOVE, "move")


def m_copy() -> RegisterMachine:
    return parse_machine(COPY, "copy")


def m_parity() -> RegisterMachine:
    return parse_machine(PARITY, "parity")


def data_text(name: str) -> str:
    """Contents of a file shipped in ``mpmrs/data``."""
    return resources.files("mpmrs.data").joinpath(name).read_text(encoding="utf-8")
