"""Deterministic register machines and the 22-instruction universal machine.

Instruction forms: ``INC i q`` (increment), ``DEC i q`` (decrement, undefined
on zero), ``BRANCH i q s`` (go to q if register i is non-zero, else s),
``DECJZ i q s`` (decrement and go to q, or go to s when the register is zero)
and ``STOP``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


class MachineError(Exception):
    pass


class MalformedMachine(MachineError):
    pass


INC, DEC, BRANCH, DECJZ, STOP = "INC", "DEC", "BRANCH", "DECJZ", "STOP"
_ARITY = {INC: (1, 1), DEC: (1, 1), BRANCH: (1, 2), DECJZ: (1, 2), STOP: (0, 0)}


@dataclass(frozen=True)
class Instruction:
    op: str
    register: Optional[int] = None
    next: Optional[str] = None
    alt: Optional[str] = None

    def __post_init__(self):
        if self.op not in _ARITY:
            raise MachineError(f"unknown instruction {self.op!r}")

    def targets(self) -> tuple[str, ...]:
        return tuple(t for t in (self.next, self.alt) if t is not None)

    def render(self) -> str:
        parts = [self.op]
        if self.register is not None:
            parts.append(str(self.register))
        parts.extend(self.targets())
        return " ".join(parts)


def Inc(register: int, next: str) -> Instruction:
    return Instruction(INC, register, next)


def Dec(register: int, next: str) -> Instruction:
    return Instruction(DEC, register, next)


def Branch(register: int, next_nonzero: str, next_zero: str) -> Instruction:
    return Instruction(BRANCH, register, next_nonzero, next_zero)


def DecJz(register: int, next_success: str, next_zero: str) -> Instruction:
    return Instruction(DECJZ, register, next_success, next_zero)


def Stop() -> Instruction:
    return Instruction(STOP)


def state_sort_key(state: str):
    """Numeric-aware ordering: q3 < q9 < q12 < qf."""
    return [(0, int(tok), "") if tok.isdigit() else (1, 0, tok)
            for tok in re.findall(r"\d+|\D+", state)]


@dataclass(frozen=True)
class RegisterMachine:
    """A register machine ``(Q, n, q0, qf, P)``.

    ``instructions`` keeps every (state, instruction) pair as given, so that
    duplicate definitions survive long enough for :func:`validate_machine`
    to report them; execution uses the first definition.
    """

    registers: int
    start: str
    final: str
    instructions: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    @property
    def program(self) -> dict:
        prog = {}
        for state, ins in self.instructions:
            prog.setdefault(state, ins)
        return prog

    @property
    def states(self) -> frozenset:
        out = {self.start, self.final}
        for state, ins in self.instructions:
            out.add(state)
            out.update(ins.targets())
        return frozenset(out)

    def sorted_states(self) -> list[str]:
        return sorted(self.states, key=state_sort_key)

    @classmethod
    def from_program(cls, program: dict, registers: int, start: str, final: str,
                     name: str = "") -> "RegisterMachine":
        items = list(program.items())
        if final not in program:
            items.append((final, Stop()))
        return cls(registers, start, final, tuple(items), name)

    def count(self, op: str) -> int:
        return sum(1 for ins in self.program.values() if ins.op == op)


@dataclass(frozen=True)
class RmConfiguration:
    state: str
    regs: tuple

    def __post_init__(self):
        object.__setattr__(self, "regs", tuple(self.regs))
        if any(r < 0 for r in self.regs):
            raise MachineError(f"negative register in {self.regs}")

    def __str__(self) -> str:
        return f"({self.state}, {', '.join(map(str, self.regs))})"


def initial_configuration(m: RegisterMachine, values: Sequence[int] = ()) -> RmConfiguration:
    values = list(values)
    if len(values) > m.registers:
        raise MachineError(f"{len(values)} inputs for a machine with {m.registers} registers")
    return RmConfiguration(m.start, tuple(values) + (0,) * (m.registers - len(values)))


def rm_step(m: RegisterMachine, c: RmConfiguration) -> Optional[RmConfiguration]:
    """Execute one instruction; returns None when ``c`` is at the final state."""
    if c.state == m.final:
        return None
    ins = m.program.get(c.state)
    if ins is None or ins.op == STOP:
        raise MalformedMachine(f"state {c.state} has no executable instruction")
    regs = list(c.regs)
    i = ins.register
    if i is None or not 0 <= i < m.registers:
        raise MalformedMachine(f"state {c.state}: register {i} out of range")
    if ins.op == INC:
        regs[i] += 1
        return RmConfiguration(ins.next, regs)
    if ins.op == DEC:
        if regs[i] == 0:
            raise MachineError(f"state {c.state}: DEC on empty register R{i}")
        regs[i] -= 1
        return RmConfiguration(ins.next, regs)
    if ins.op == BRANCH:
        return RmConfiguration(ins.next if regs[i] else ins.alt, regs)
    # DECJZ
    if regs[i]:
        regs[i] -= 1
        return RmConfiguration(ins.next, regs)
    return RmConfiguration(ins.alt, regs)


@dataclass
class RmOutcome:
    halted: bool
    config: RmConfiguration
    steps: int
    trace: list = field(default_factory=list)

    @property
    def kind(self) -> str:
        return "halted" if self.halted else "bound_exceeded"


def rm_run(m: RegisterMachine, start: RmConfiguration | Sequence[int], max_steps: int = 10**6,
           record: bool = False) -> RmOutcome:
    """Run until the final state or ``max_steps`` instructions.

    With ``record`` the trace holds the configuration after every executed
    instruction, so ``len(trace) == steps``.
    """
    c = start if isinstance(start, RmConfiguration) else initial_configuration(m, start)
    trace = []
    for n in range(max_steps + 1):
        if c.state == m.final:
            return RmOutcome(True, c, n, trace)
        if n == max_steps:
            break
        c = rm_step(m, c)
        if record:
            trace.append(c)
    return RmOutcome(False, c, max_steps, trace)


def rm_trace(m: RegisterMachine, start: RmConfiguration | Sequence[int], max_steps: int) -> list:
    """Configurations visited, starting with the initial one."""
    c = start if isinstance(start, RmConfiguration) else initial_configuration(m, start)
    out = rm_run(m, c, max_steps, record=True)
    return [c] + out.trace


def validate_machine(m: RegisterMachine) -> list[str]:
    """Warnings: nondeterminism, register bounds, missing final, unreachable states."""
    diags = []
    seen = {}
    for state, ins in m.instructions:
        if state in seen:
            diags.append(f"determinism violation: state {state} has more than one instruction")
        seen.setdefault(state, ins)
        if ins.op == STOP and state != m.final:
            diags.append(f"STOP at non-final state {state}")
        if ins.register is not None and not 0 <= ins.register < m.registers:
            diags.append(f"state {state}: register {ins.register} out of range 0..{m.registers - 1}")
    prog = m.program
    if m.final in prog and prog[m.final].op != STOP:
        diags.append(f"final state {m.final} has a non-STOP instruction")
    for state in m.sorted_states():
        if state != m.final and state not in prog:
            diags.append(f"state {state} has no instruction")
    reach = {m.start}
    todo = deque([m.start])
    while todo:
        s = todo.popleft()
        ins = prog.get(s)
        for t in ins.targets() if ins else ():
            if t not in reach:
                reach.add(t)
                todo.append(t)
    if m.final not in reach:
        diags.append(f"final state {m.final} unreachable from {m.start}")
    for state in m.sorted_states():
        if state not in reach and state != m.final:
            diags.append(f"unreachable state {state}")
    return diags


# ---------------------------------------------------------------------------
# the universal machine

U22_TEXT = """\
@registers 8
@start q1
@final qf
q1 DECJZ 1 q3 q6
q3 INC 7 q1
q4 DECJZ 5 q6 q7
q6 INC 6 q4
q7 DECJZ 6 q9 q4
q9 INC 5 q10
q10 DECJZ 7 q12 q13
q12 INC 1 q7
q13 DECJZ 6 q33 q1
q33 INC 6 q14
q14 DECJZ 4 q1 q16
q16 DECJZ 5 q18 q23
q18 DECJZ 5 q20 q27
q20 DECJZ 5 q22 q30
q22 INC 4 q16
q23 DECJZ 2 q32 q25
q25 DECJZ 0 q1 q32
q27 DECJZ 3 q32 q1
q29 INC 0 q1
q30 INC 2 q31
q31 INC 3 q32
q32 DECJZ 4 q1 qf
qf STOP
"""


def u22() -> RegisterMachine:
    """The 22-instruction universal machine exactly as listed (q25 and q29 included)."""
    return parse_machine(U22_TEXT, name="u22")


# Non-canonical repairs of the unreachable q29.  "q25" re-routes the success
# exit of q25 through q29; "q27" re-routes the zero exit of q27 through q29.
_PATCHES = {
    "q25": ("q25", DecJz(0, "q29", "q32")),
    "q27": ("q27", DecJz(3, "q32", "q29")),
}


def u22_patched(site: str = "q25") -> RegisterMachine:
    """Experimental variant of :func:`u22` that makes q29 reachable.

    NOT the listed machine.  ``site="q25"`` uses (q25, DECJZ R0, q29, q32);
    ``site="q27"`` uses (q27, DECJZ R3, q32, q29).
    """
    if site not in _PATCHES:
        raise MachineError(f"unknown patch site {site!r}; choose from {sorted(_PATCHES)}")
    state, ins = _PATCHES[site]
    base = u22()
    items = tuple((s, ins if s == state else i) for s, i in base.instructions)
    return RegisterMachine(base.registers, base.start, base.final, items, f"u22-patched-{site}")


# ---------------------------------------------------------------------------
# text format

class MachineParseError(MachineError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)
        self.line = line
        self.col = col


def parse_machine(text: str, name: str = "") -> RegisterMachine:
    registers = None
    start = final = None
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        toks = line.split()
        if toks[0].startswith("@"):
            if len(toks) != 2:
                raise MachineParseError(f"directive {toks[0]} takes one argument", lineno, col)
            key, val = toks[0][1:], toks[1]
            if key == "registers":
                if not val.isdigit():
                    raise MachineParseError(f"bad register count {val!r}", lineno, col)
                registers = int(val)
            elif key == "start":
                start = val
            elif key == "final":
                final = val
            else:
                raise MachineParseError(f"unknown directive {toks[0]}", lineno, col)
            continue
        if len(toks) < 2:
            raise MachineParseError("expected '<state> <OP> ...'", lineno, col)
        state, op, args = toks[0], toks[1].upper(), toks[2:]
        if op not in _ARITY:
            raise MachineParseError(f"unknown instruction {toks[1]!r}", lineno, col + len(state) + 1)
        nreg, ntarget = _ARITY[op]
        if len(args) != nreg + ntarget:
            raise MachineParseError(f"{op} takes {nreg + ntarget} arguments, got {len(args)}", lineno, col)
        reg = None
        if nreg:
            if not args[0].isdigit():
                raise MachineParseError(f"bad register index {args[0]!r}", lineno, col)
            reg = int(args[0])
        targets = args[nreg:]
        items.append((state, Instruction(op, reg, *targets)))
    if registers is None or start is None or final is None:
        raise MachineParseError("missing @registers, @start or @final header")
    return RegisterMachine(registers, start, final, tuple(items), name)


def write_machine(m: RegisterMachine) -> str:
    lines = [f"@registers {m.registers}", f"@start {m.start}", f"@final {m.final}"]
    lines.extend(f"{state} {ins.render()}" for state, ins in m.instructions)
    return "\n".join(lines) + "\n"


def machine_from_lines(lines: Iterable[str], registers: int, start: str, final: str,
                       name: str = "") -> RegisterMachine:
    """Build a machine from instruction lines such as ``"q0 DECJZ 1 q1 qf"``."""
    header = f"@registers {registers}\n@start {start}\n@final {final}\n"
    return parse_machine(header + "\n".join(lines), name=name)
