"""Register machine -> finite-state maximally parallel multiset rewriting.

``compile_basic`` emits one rule per increment and a five-rule block per
test-and-decrement.  The passes then trade rule count for rule size:

* ``P1`` checker encoding: a test state is encoded as ``q C_q`` from the
  start, shrinking each block to four rules; renaming chains are collapsed.
* ``P2`` increment fusion: a branch that lands on an increment performs the
  increment itself.
* ``P3`` phases: every per-state ``q -> q'`` rule is replaced by one global
  ``S -> S'``.
* ``P4`` shared checkers: one decrement rule per tested register instead of
  one per test state.

Rule labels carry the role of each rule (``q7.dec``, ``q7.succ``...).  The
source machine and the stages applied so far travel in the system's
:class:`~mpmrs.engine.StateEncoding`, which is also what co-simulation reads.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Optional, Sequence

from .engine import (
    FsMpmrsSystem,
    RewriteRule,
    StateEncoding,
    maximal_steps,
)
from .machine import (
    BRANCH,
    DEC,
    DECJZ,
    INC,
    STOP,
    Instruction,
    RegisterMachine,
    initial_configuration,
    rm_step,
    state_sort_key,
)
from .multiset import EMPTY, Multiset, msum

log = logging.getLogger(__name__)

PASSES = ("P1", "P2", "P3", "P4")
PHASE, PHASE_ON = "S", "S'"
_RESERVED = re.compile(r"^(R\d+|C\d+'?|C_.*|S'?|D\d+|phase)$")


class CompileError(Exception):
    pass


@dataclass(frozen=True)
class CompilationOptions:
    faithful_halt: bool = False
    fusion_size_cap: int = 5
    passes: tuple = ()
    # increment states P2 may fuse; None means every eligible one
    fusion_targets: Optional[frozenset] = None
    terminal: tuple = (0,)

    def __post_init__(self):
        passes = tuple(self.passes)
        unknown = [p for p in passes if p not in PASSES]
        if unknown:
            raise CompileError(f"unknown passes {unknown}; choose from {PASSES}")
        if "P2" in passes and "P1" not in passes:
            raise CompileError("P2 requires P1")
        if "P3" in passes and "P1" not in passes:
            raise CompileError("P3 requires P1")
        if "P4" in passes and "P3" not in passes:
            raise CompileError("P4 requires P3")
        object.__setattr__(self, "passes", tuple(p for p in PASSES if p in passes))
        if self.fusion_targets is not None:
            object.__setattr__(self, "fusion_targets", frozenset(self.fusion_targets))


@dataclass(frozen=True)
class StageStats:
    stage: str
    rule_count: int
    max_rule_size: int
    states_eliminated: int = 0
    rules_glued: int = 0


@dataclass(frozen=True)
class Lineage:
    """What the passes need to know about where a system came from."""

    machine: RegisterMachine  # lowered: INC / DECJZ / STOP only
    stages: tuple = ("P0",)
    report: tuple = ()
    options: CompilationOptions = field(default_factory=CompilationOptions)


def reg(i: int) -> str:
    return f"R{i}"


def primed(sym: str, n: int = 1) -> str:
    return sym + "'" * n


def checker(q: str) -> str:
    return f"C_{q}"


def reg_checker(i: int) -> str:
    return f"C{i}"


# ---------------------------------------------------------------------------
# machine lowering


def lower_machine(m: RegisterMachine) -> RegisterMachine:
    """Rewrite BRANCH and DEC into DECJZ/INC form.

    ``BRANCH i q s`` at p becomes ``p DECJZ i p~b s`` plus ``p~b INC i q``;
    ``DEC i q`` becomes ``DECJZ i q q``.
    """
    prog = m.program
    if all(ins.op in (INC, DECJZ, STOP) for ins in prog.values()):
        return m
    taken = set(m.states)
    items = []
    for state, ins in prog.items():
        if ins.op == BRANCH:
            fresh = f"{state}~b"
            while fresh in taken:
                fresh += "~"
            taken.add(fresh)
            items.append((state, Instruction(DECJZ, ins.register, fresh, ins.alt)))
            items.append((fresh, Instruction(INC, ins.register, ins.next)))
        elif ins.op == DEC:
            items.append((state, Instruction(DECJZ, ins.register, ins.next, ins.next)))
        else:
            items.append((state, ins))
    return RegisterMachine(m.registers, m.start, m.final, tuple(items), m.name)


def _check_names(m: RegisterMachine):
    for q in m.states:
        if _RESERVED.match(q) or "'" in q:
            raise CompileError(f"state name {q!r} collides with generated symbols")


# ---------------------------------------------------------------------------
# helpers over compiled systems


def lineage(sys: FsMpmrsSystem) -> Lineage:
    enc = sys.encoding
    src = enc.source if enc is not None else None
    if src is None:
        raise CompileError("system carries no compilation lineage")
    return src


def _encoding(states: dict, registers: int, source: Lineage, phase: str = "base") -> StateEncoding:
    return StateEncoding(dict(states), {i: reg(i) for i in range(registers)}, phase, source)


def _rebuild(sys: FsMpmrsSystem, rules: Sequence[RewriteRule], states: dict, initial: Multiset,
             lin: Lineage, stage: str, states_eliminated: int = 0, rules_glued: int = 0,
             phase: str = "base") -> FsMpmrsSystem:
    symbols = set(sys.registers) | set(initial.support())
    for r in rules:
        symbols |= r.lhs.support() | r.rhs.support()
    for cfg in states.values():
        symbols |= cfg.support()
    entry = StageStats(stage, len(rules), max((r.size for r in rules), default=0),
                       states_eliminated, rules_glued)
    lin = replace(lin, stages=lin.stages + (stage,), report=lin.report + (entry,))
    enc = _encoding(states, lin.machine.registers, lin, phase)
    return FsMpmrsSystem(frozenset(symbols), initial, tuple(rules), sys.registers, sys.terminal, enc)


def _retarget(ms: Multiset, old: dict, new: dict) -> Multiset:
    """Replace the encoding of whichever state ``ms`` produces."""
    for q, old_cfg in old.items():
        if q in ms and old_cfg <= ms and q in new and new[q] != old_cfg:
            return ms - old_cfg + new[q]
    return ms


def _role(rule: RewriteRule) -> tuple[str, str]:
    owner, _, role = rule.label.rpartition(".")
    return owner, role


def with_registers(sys: FsMpmrsSystem, values: Sequence[int]) -> FsMpmrsSystem:
    """Same system, initial registers replaced by ``values`` (R0, R1, ...)."""
    base = sys.initial.without(sys.registers)
    regs = Multiset({reg(i): v for i, v in enumerate(values) if v})
    return replace(sys, initial=base + regs)


# ---------------------------------------------------------------------------
# P0


def compile_basic(m: RegisterMachine, opts: CompilationOptions = CompilationOptions(),
                  inputs: Sequence[int] = ()) -> FsMpmrsSystem:
    """One rule ``q -> R_i q1`` per increment and five rules per test-decrement.

    Unless ``opts.faithful_halt``, the zero-exit rule of a block whose zero
    target is the final state is omitted; the system then halts by
    stability with a leftover state residue that carries no register.
    """
    prog_check = [ins.op for ins in m.program.values()]
    if not prog_check:
        raise CompileError("machine has no instructions")
    low = lower_machine(m)
    _check_names(low)
    rules = []
    for q, ins in low.program.items():
        if ins.op == INC:
            rules.append(RewriteRule(f"{q}.inc", Multiset([q]), Multiset([reg(ins.register), ins.next])))
        elif ins.op == DECJZ:
            c, c1 = checker(q), primed(checker(q))
            rules.append(RewriteRule(f"{q}.enter", Multiset([q]), Multiset([primed(q), c])))
            rules.append(RewriteRule(f"{q}.wait", Multiset([primed(q)]), Multiset([primed(q, 2)])))
            rules.append(RewriteRule(f"{q}.dec", Multiset([c, reg(ins.register)]), Multiset([c1])))
            rules.append(RewriteRule(f"{q}.succ", Multiset([primed(q, 2), c1]), Multiset([ins.next])))
            if opts.faithful_halt or ins.alt != low.final:
                rules.append(RewriteRule(f"{q}.zero", Multiset([primed(q, 2), c]), Multiset([ins.alt])))
        elif ins.op == STOP:
            if q != low.final:
                raise CompileError(f"STOP at non-final state {q}")
        else:
            raise CompileError(f"unsupported instruction at {q}: {ins.op}")
    states = {q: Multiset([q]) for q in low.sorted_states()}
    registers = frozenset(reg(i) for i in range(low.registers))
    terminal = frozenset(reg(i) for i in opts.terminal)
    if not terminal <= registers:
        raise CompileError(f"terminal registers {sorted(terminal - registers)} out of range")
    regs = Multiset({reg(i): v for i, v in enumerate(inputs) if v})
    initial = states[low.start] + regs
    lin = Lineage(low, (), (), opts)
    shell = FsMpmrsSystem(frozenset(registers | {low.start}), EMPTY, (), registers, terminal)
    return _rebuild(shell, rules, states, initial, lin, "P0")


# ---------------------------------------------------------------------------
# P1


def collapse_chains(sys: FsMpmrsSystem) -> tuple[list, set]:
    """Collapse renaming chains ``a -> b``, ``b -> w`` into ``a -> w``.

    A link is collapsed when ``a -> b`` is a pure renaming (single symbol to
    single non-register symbol), ``b`` is produced by no other rule, is not in
    the initial multiset, and is consumed by exactly one rule whose left side
    is ``b`` alone.  Returns the new rule list and the eliminated symbols.
    """
    rules = list(sys.rules)
    gone = set()
    changed = True
    while changed:
        changed = False
        for k, r1 in enumerate(rules):
            if r1.lhs.size != 1 or r1.rhs.size != 1:
                continue
            (b,) = r1.rhs.support()
            (a,) = r1.lhs.support()
            if a == b or b in sys.registers or a in sys.registers or b in sys.initial:
                continue
            producers = [r for r in rules if b in r.rhs]
            consumers = [r for r in rules if b in r.lhs]
            if len(producers) != 1 or len(consumers) != 1 or consumers[0].lhs != r1.rhs:
                continue
            r2 = consumers[0]
            if r2 is r1:
                continue
            rules[k] = RewriteRule(r1.label, r1.lhs, r2.rhs)
            rules.remove(r2)
            gone.add(b)
            changed = True
            break
    return rules, gone


def pass_checker_encoding(sys: FsMpmrsSystem) -> FsMpmrsSystem:
    """P1: encode test states as ``q C_q`` and collapse renaming chains.

    On a system without compilation lineage only the chain collapse runs.
    """
    enc = sys.encoding
    lin = enc.source if enc is not None else None
    if lin is None:
        rules, _ = collapse_chains(sys)
        return _with_rules(sys, rules)
    states = dict(enc.states)
    prog = lin.machine.program
    tests = {q for q, ins in prog.items() if ins.op == DECJZ and q in states}
    new_states = {q: states[q] + Multiset([checker(q)]) if q in tests else states[q] for q in states}
    out = []
    for r in sys.rules:
        owner, role = _role(r)
        if owner in tests and role == "enter":
            continue
        if owner in tests and role == "wait":
            out.append(RewriteRule(f"{owner}.prime", Multiset([owner]), Multiset([primed(owner)])))
        elif owner in tests and role in ("succ", "zero"):
            c = checker(owner) if role == "zero" else primed(checker(owner))
            lhs = Multiset([primed(owner), c])
            out.append(RewriteRule(r.label, lhs, _retarget(r.rhs, states, new_states)))
        else:
            out.append(RewriteRule(r.label, r.lhs, _retarget(r.rhs, states, new_states)))
    initial = _retarget(sys.initial, states, new_states)
    rules, gone = collapse_chains(replace(sys, rules=tuple(out), initial=initial))
    dropped = [q for q, cfg in new_states.items() if cfg.support() & gone]
    for q in dropped:
        del new_states[q]
    return _rebuild(sys, rules, new_states, initial, lin, "P1", states_eliminated=len(dropped))


def _with_rules(sys: FsMpmrsSystem, rules: Sequence[RewriteRule]) -> FsMpmrsSystem:
    symbols = set(sys.registers) | set(sys.initial.support())
    for r in rules:
        symbols |= r.lhs.support() | r.rhs.support()
    return replace(sys, alphabet=frozenset(symbols), rules=tuple(rules))


# ---------------------------------------------------------------------------
# P2


def fusion_candidates(sys: FsMpmrsSystem, cap: int) -> list[tuple[str, str, int]]:
    """(branch label, increment state, fused size) pairs eligible for fusion."""
    lin = lineage(sys)
    prog = lin.machine.program
    states = sys.encoding.states
    by_label = {r.label: r for r in sys.rules}
    out = []
    for t in sorted(states, key=state_sort_key):
        ins = prog.get(t)
        if ins is None or ins.op != INC or t == lin.machine.start:
            continue
        inc_rule = by_label.get(f"{t}.inc")
        if inc_rule is None:
            continue
        producers = [r for r in sys.rules if t in r.rhs and r is not inc_rule]
        if len(producers) != 1 or _role(producers[0])[1] not in ("succ", "zero"):
            continue
        branch = producers[0]
        fused_rhs = branch.rhs - states[t] + inc_rule.rhs
        size = branch.lhs.size + fused_rhs.size
        if size <= cap:
            out.append((branch.label, t, size))
    return out


def pass_fuse_increments(sys: FsMpmrsSystem, cap: int = 5,
                         targets: Optional[Iterable[str]] = None) -> FsMpmrsSystem:
    """P2: let branch rules perform the increment they lead to.

    Increment states are fused in ascending state order while the fused rule
    stays within ``cap`` symbols and the increment has no other predecessor.
    ``targets`` restricts which increment states may be fused.
    """
    lin = lineage(sys)
    if "P1" not in lin.stages:
        raise CompileError("P2 requires P1")
    allowed = None if targets is None else set(targets)
    rules = list(sys.rules)
    states = dict(sys.encoding.states)
    fused = []
    while True:
        current = replace(sys, rules=tuple(rules), encoding=_encoding(states, lin.machine.registers, lin))
        cands = [c for c in fusion_candidates(current, cap) if allowed is None or c[1] in allowed]
        if not cands:
            break
        label, t, _ = cands[0]
        by_label = {r.label: r for r in rules}
        branch, inc_rule = by_label[label], by_label[f"{t}.inc"]
        new = RewriteRule(label, branch.lhs, branch.rhs - states[t] + inc_rule.rhs)
        rules = [new if r.label == label else r for r in rules if r.label != inc_rule.label]
        del states[t]
        fused.append(t)
    log.debug("fused increments: %s", fused)
    return _rebuild(sys, rules, states, sys.initial, lin, "P2",
                    states_eliminated=len(fused), rules_glued=len(fused))


# ---------------------------------------------------------------------------
# P3


def pass_phases(sys: FsMpmrsSystem) -> FsMpmrsSystem:
    """P3: one global ``S -> S'`` rule replaces every per-state ``q -> q'``.

    States are encoded with the phase symbol ``S`` (the final state is not,
    so a halted system is stable).  Transitions out of a state wait for
    ``S'`` and restore ``S`` through the target encoding.
    """
    lin = lineage(sys)
    if "P1" not in lin.stages:
        raise CompileError("P3 requires P1")
    final = lin.machine.final
    old = dict(sys.encoding.states)
    new = {q: cfg if q == final else cfg + Multiset([PHASE]) for q, cfg in old.items()}
    out = []
    glued = 0
    for r in sys.rules:
        owner, role = _role(r)
        if role == "prime":
            glued += 1
            continue
        if role in ("succ", "zero"):
            lhs = r.lhs - Multiset([primed(owner)]) + Multiset([owner, PHASE_ON])
            out.append(RewriteRule(r.label, lhs, _retarget(r.rhs, old, new)))
        elif role == "inc":
            out.append(RewriteRule(r.label, r.lhs + Multiset([PHASE_ON]), _retarget(r.rhs, old, new)))
        else:
            out.append(RewriteRule(r.label, r.lhs, _retarget(r.rhs, old, new)))
    rules = [RewriteRule("phase", Multiset([PHASE]), Multiset([PHASE_ON]))] + out
    initial = _retarget(sys.initial, old, new)
    return _rebuild(sys, rules, new, initial, lin, "P3", rules_glued=glued, phase="S")


# ---------------------------------------------------------------------------
# P4


def _rename(ms: Multiset, names: dict) -> Multiset:
    if not any(s in names for s in ms.support()):
        return ms
    counts = {}
    for s, n in ms.items():
        t = names.get(s, s)
        counts[t] = counts.get(t, 0) + n
    return Multiset(counts)


def pass_shared_checkers(sys: FsMpmrsSystem) -> FsMpmrsSystem:
    """P4: per-register checkers ``C_i`` shared by every test of register i."""
    lin = lineage(sys)
    if "P3" not in lin.stages:
        raise CompileError("P4 requires P3")
    prog = lin.machine.program
    tests = {q: ins.register for q, ins in prog.items() if ins.op == DECJZ}
    names = {}
    for q, i in tests.items():
        names[checker(q)] = reg_checker(i)
        names[primed(checker(q))] = primed(reg_checker(i))
    used = sorted({i for q, i in tests.items() if any(_role(r) == (q, "dec") for r in sys.rules)})
    kept, glued = [], 0
    for r in sys.rules:
        owner, role = _role(r)
        if role == "dec" and owner in tests:
            glued += 1
            continue
        kept.append(RewriteRule(r.label, _rename(r.lhs, names), _rename(r.rhs, names)))
    checkers = [RewriteRule(f"D{i}", Multiset([reg_checker(i), reg(i)]), Multiset([primed(reg_checker(i))]))
                for i in used]
    head = [r for r in kept if r.label == "phase"]
    rest = [r for r in kept if r.label != "phase"]
    states = {q: _rename(cfg, names) for q, cfg in sys.encoding.states.items()}
    initial = _rename(sys.initial, names)
    return _rebuild(sys, head + checkers + rest, states, initial, lin, "P4", rules_glued=glued, phase="S")


PASS_FUNCS = {
    "P1": pass_checker_encoding,
    "P3": pass_phases,
    "P4": pass_shared_checkers,
}


def compile_machine(m: RegisterMachine, opts: CompilationOptions = CompilationOptions(),
                    inputs: Sequence[int] = ()) -> FsMpmrsSystem:
    """``compile_basic`` followed by ``opts.passes`` in canonical order."""
    sys = compile_basic(m, opts, inputs)
    for p in opts.passes:
        if p == "P2":
            sys = pass_fuse_increments(sys, opts.fusion_size_cap, opts.fusion_targets)
        else:
            sys = PASS_FUNCS[p](sys)
    return sys


# ---------------------------------------------------------------------------
# reporting


def stats(sys: FsMpmrsSystem) -> tuple[int, int]:
    """(rule count, largest rule size)."""
    return len(sys.rules), max((r.size for r in sys.rules), default=0)


def pass_report(sys: FsMpmrsSystem) -> tuple:
    return lineage(sys).report


def load_calibration() -> dict:
    text = resources.files("mpmrs.data").joinpath("p2_calibration.json").read_text()
    return json.loads(text)


def calibrated_options(machine: str = "u22", passes: Sequence[str] = ("P1", "P2"),
                       **kw) -> CompilationOptions:
    """Options using the frozen fusion subset for a shipped machine."""
    cal = load_calibration()[machine]
    return CompilationOptions(passes=tuple(passes), fusion_size_cap=cal["cap"],
                              fusion_targets=frozenset(cal["fuse"]), **kw)


# ---------------------------------------------------------------------------
# co-simulation


@dataclass
class InputVerdict:
    inputs: tuple
    status: str  # equivalent | mismatch | inconclusive
    reason: str = ""
    checkpoints: int = 0
    machine_steps: int = 0
    system_steps: int = 0
    final_registers: Optional[tuple] = None
    terminal: Optional[Multiset] = None
    witness: list = field(default_factory=list)


@dataclass
class CosimReport:
    verdicts: list

    @property
    def status(self) -> str:
        kinds = {v.status for v in self.verdicts}
        if "mismatch" in kinds:
            return "mismatch"
        if "inconclusive" in kinds:
            return "inconclusive"
        return "equivalent"

    @property
    def mismatches(self) -> list:
        return [v for v in self.verdicts if v.status == "mismatch"]

    def witness(self) -> Optional[InputVerdict]:
        bad = self.mismatches
        return bad[0] if bad else None


def _cosim_one(low: RegisterMachine, sys: FsMpmrsSystem, values: Sequence[int], bound: int,
               witness_len: int) -> InputVerdict:
    enc = sys.encoding
    n = low.registers
    values = tuple(values) + (0,) * (n - len(values))
    rm = [initial_configuration(low, values)]
    halted = False
    while len(rm) <= bound:
        nxt = rm_step(low, rm[-1])
        if nxt is None:
            halted = True
            break
        rm.append(nxt)
    cfg = with_registers(sys, values).initial
    recent = []
    verdict = InputVerdict(values, "inconclusive", machine_steps=len(rm) - 1)
    pos = -1
    max_sys_steps = 8 * bound + 16
    encoded = set(enc.states)

    def fail(reason):
        verdict.status = "mismatch"
        verdict.reason = reason
        # before any step the failing configuration itself is the witness
        verdict.witness = list(recent) or [(EMPTY, cfg)]
        return verdict

    for step in range(max_sys_steps + 1):
        verdict.system_steps = step
        state_cfg = sys.state_of(cfg)
        q = enc.lookup(state_cfg)
        regs = tuple(cfg[enc.register_map[i]] for i in range(n))
        if q is not None:
            j = pos + 1
            while j < len(rm) and rm[j].state != q:
                if rm[j].state in encoded:
                    return fail(f"system entered {q} ({state_cfg}) but the machine visits "
                                f"encoded state {rm[j].state} first (machine step {j})")
                j += 1
            if j == len(rm):
                if halted:
                    return fail(f"system entered {q} after the machine halted")
                verdict.reason = "machine step bound reached"
                return verdict
            if rm[j].regs != regs:
                return fail(f"register mismatch at {q}: machine {rm[j].regs} (step {j}), system {regs}")
            pos = j
            verdict.checkpoints += 1
        options = maximal_steps(sys, cfg)
        if not options:
            if not halted:
                return fail(f"system stable at {cfg} while the machine is still running "
                            f"(machine at {rm[-1]})")
            tail = [c.state for c in rm[pos + 1:]]
            missed = [s for s in tail if s in encoded and s != low.final]
            if missed:
                return fail(f"system halted without visiting {missed[0]}")
            if regs != rm[-1].regs:
                return fail(f"final registers differ: machine {rm[-1].regs}, system {regs}")
            verdict.status = "equivalent"
            verdict.final_registers = regs
            verdict.terminal = cfg.project(sys.terminal)
            return verdict
        states = {sys.state_of(succ) for _, succ in options}
        if len(states) > 1:
            recent.append((options[0][0], cfg))
            return fail(f"state-level nondeterminism at {state_cfg}: "
                        + " | ".join(f"{b} => {s}" for b, s in
                                     sorted(((b, sys.state_of(y)) for b, y in options),
                                            key=lambda bs: (bs[0].key(), bs[1].key()))))
        bag, cfg = options[0]
        recent.append((bag, cfg))
        if len(recent) > witness_len:
            recent.pop(0)
        if pos == len(rm) - 1 and not halted:
            verdict.reason = "machine step bound reached"
            return verdict
    verdict.reason = "system step bound reached"
    return verdict


def cosimulate(m: RegisterMachine, sys: FsMpmrsSystem, inputs: Iterable[Sequence[int]],
               bound: int = 100_000, witness_len: int = 12) -> CosimReport:
    """Run ``m`` and ``sys`` side by side on each input vector.

    Every system configuration whose non-register part equals the encoding
    of a machine state is a checkpoint: the machine must reach that state
    next (passing only through states without an encoding) with identical
    registers.  On stability the machine must have halted with the same
    registers.  Each step must also be deterministic at the state level.
    """
    if sys.encoding is None:
        raise CompileError("system has no state encoding to co-simulate against")
    low = lower_machine(m)
    return CosimReport([_cosim_one(low, sys, v, bound, witness_len) for v in inputs])


def drop_rule(sys: FsMpmrsSystem, label: str) -> FsMpmrsSystem:
    """Fault injection: the same system without one rule."""
    rules = tuple(r for r in sys.rules if r.label != label)
    if len(rules) == len(sys.rules):
        raise CompileError(f"no rule labelled {label!r}")
    return replace(sys, rules=rules)
