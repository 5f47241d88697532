"""The 23-rule universal FsMPMRS and a lockstep harness against U22.

The rule table is kept as text and parsed on demand, so a checksum test can
compare the live system against the embedded copy token for token.

Nothing here knows the state encodings in advance.  ``derive_dictionary``
runs the system and a register machine side by side and infers which base
phase state configuration stands for which machine state; ``lockstep`` then
replays runs against that dictionary.
"""

from __future__ import annotations

import hashlib
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .engine import (
    DEFAULT_MAX_CONFIGS,
    FsMpmrsSystem,
    OutcomeKind,
    RewriteRule,
    RunOutcome,
    StateEncoding,
    maximal_steps,
    reachable,
)
from .machine import RegisterMachine, initial_configuration, rm_step, u22
from .multiset import Multiset

log = logging.getLogger(__name__)

REGISTERS = tuple(f"R{i}" for i in range(8))
TERMINAL = ("R1",)
PHASE_SYMBOLS = ("X", "T")
SEED = "L Q L Q J J N X X X"

U23_TABLE = """\
phase: X X -> X T
D0: I J K P Q R0 -> L Q L Q J J M
D1: L Q L Q J J N R1 -> L P L P J J M R7
D2: I I K P Q R2 -> J J K P Q
D3: q27 C3 R3 -> J J K P Q
D4: J J K R4 -> J J L L M
D5: J J O R5 -> C5'
D6: I J L R6 -> C6'
D7: I I L Q L Q N R7 -> I J L O R1
A: I T T -> J X X
B: J J M T T -> J J N X X
C: L P -> L Q
a: L Q L Q J J N T T -> J J L O R6 X X
b: L C5' T T -> J J L O R6 X X
c: O C6' T T -> I I L Q L Q N R5 X X
d: Q L Q N C6' T T -> J J K Q Q R6 X X
e: q27 C3 T T -> L Q L Q J J N R0 X X
f: q16 J J O C5' C5' T T -> L Q L Q J J N R2 R3 X X
g: q16 C5' C5' C5' T T -> q16 J J O J J O J J O X X
1: J J L O T T -> I J L O X X
5: J J K Q Q T -> q16 J J O J J O J J O X X
8: q16 J J O J J O J J O -> I I K P Q M X X
12: q16 J J O J J O J J O -> q27 C3 X X
"""

# Rule replacements that make the table agree with U22 (q27-patched) on
# every input checked.  Not part of the canonical system.
REPAIRS = {
    "5": "5: J J K Q Q T T -> q16 J J O J J O J J O X X",
    "8": "8: q16 J J O J J O J J O T T -> I I K P Q X X",
    "12": "12: q16 J J O J J O C5' T T -> q27 C3 X X",
    "g": "g: q16 C5' C5' C5' T T -> q16 J J O J J O J J O R4 X X",
    "f": "f: q16 J J O C5' C5' T T -> J J K P Q R2 R3 X X",
}


class UniversalError(Exception):
    pass


def table_digest(text: str = U23_TABLE) -> str:
    """SHA-256 over the whitespace-normalised rule lines."""
    lines = [" ".join(line.split()) for line in text.strip().splitlines()]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


U23_SHA256 = table_digest()


def _rules(text: str) -> tuple:
    return tuple(RewriteRule.parse(line) for line in text.strip().splitlines())


def initial_config(*regs: int) -> Multiset:
    """The seed ``L Q L Q J J N X^3`` plus ``R_k^{i_k}`` for each given count."""
    if len(regs) > len(REGISTERS):
        raise UniversalError(f"{len(regs)} register values for {len(REGISTERS)} registers")
    if any(v < 0 for v in regs):
        raise UniversalError("register values must be nonnegative")
    return Multiset.parse(SEED) + Multiset({REGISTERS[k]: v for k, v in enumerate(regs) if v})


def _system(rules: tuple, regs: Sequence[int] = ()) -> FsMpmrsSystem:
    symbols = set(REGISTERS)
    for r in rules:
        symbols |= r.lhs.support() | r.rhs.support()
    return FsMpmrsSystem(frozenset(symbols), initial_config(*regs), rules,
                         frozenset(REGISTERS), frozenset(TERMINAL))


def u23_system(regs: Sequence[int] = ()) -> FsMpmrsSystem:
    """The 23-rule universal system exactly as tabulated."""
    return _system(_rules(U23_TABLE), regs)


def u23_repaired(regs: Sequence[int] = ()) -> FsMpmrsSystem:
    """The table with the rules in ``REPAIRS`` substituted.

    Five rules change: ``5`` and ``8`` consume ``T T`` like their siblings,
    ``12`` is guarded by a ``C5'``, ``g`` restores the ``R4`` that ``D4``
    would otherwise lose, and ``f`` leads to the encoding of q32.
    """
    rules = tuple(RewriteRule.parse(REPAIRS[r.label]) if r.label in REPAIRS else r
                  for r in _rules(U23_TABLE))
    return _system(rules, regs)


def phase_count(cfg: Multiset) -> int:
    return sum(cfg[s] for s in PHASE_SYMBOLS)


def is_base_phase(cfg: Multiset) -> bool:
    return cfg["X"] == 3 and cfg["T"] == 0


# ---------------------------------------------------------------------------
# deterministic stepping


@dataclass
class Finding:
    """Something the harness observed that contradicts the expected behaviour."""

    kind: str  # nondeterminism | phase | mismatch | unknown-state | stable-early
    step: int
    message: str
    witness: list = field(default_factory=list)

    def __str__(self) -> str:
        return f"{self.kind} at step {self.step}: {self.message}"


def _advance(sys: FsMpmrsSystem, cfg: Multiset, step: int):
    """One transition; returns (bag, successor), None if stable, or a Finding."""
    options = maximal_steps(sys, cfg)
    if not options:
        return None
    states = {sys.state_of(y) for _, y in options}
    if len(states) > 1:
        alts = " | ".join(f"{b} => {sys.state_of(y)}" for b, y in options)
        return Finding("nondeterminism", step, f"from {sys.state_of(cfg)}: {alts}")
    return options[0]


def _machine_trace(m: RegisterMachine, regs: Sequence[int], bound: int):
    trace = [initial_configuration(m, tuple(regs) + (0,) * (m.registers - len(regs)))]
    halted = False
    while len(trace) <= bound:
        nxt = rm_step(m, trace[-1])
        if nxt is None:
            halted = True
            break
        trace.append(nxt)
    return trace, halted


def _checkpoints(sys: FsMpmrsSystem, regs: Sequence[int], max_steps: int, witness_len: int = 8):
    """Base-phase configurations of a deterministic run.

    Returns (list of (step, state config, register vector), end, finding)
    where ``end`` is "stable" or "bound".
    """
    cfg = _system(sys.rules, regs).initial
    recent = []
    out = []
    for step in range(max_steps + 1):
        if phase_count(cfg) != 3:
            return out, "finding", Finding("phase", step, f"{phase_count(cfg)} phase tokens in {cfg}",
                                           list(recent))
        if is_base_phase(cfg):
            out.append((step, sys.state_of(cfg), tuple(cfg[r] for r in REGISTERS)))
        nxt = _advance(sys, cfg, step)
        if nxt is None:
            return out, "stable", None
        if isinstance(nxt, Finding):
            nxt.witness = list(recent)
            return out, "finding", nxt
        recent.append(nxt)
        if len(recent) > witness_len:
            recent.pop(0)
        cfg = nxt[1]
    return out, "bound", None


# ---------------------------------------------------------------------------
# dictionary derivation


@dataclass
class U23Dictionary:
    map: dict  # machine state -> base-phase state configuration (X^3 included)
    log: list = field(default_factory=list)
    samples: int = 0

    def lookup(self, state_cfg: Multiset) -> Optional[str]:
        for q, s in self.map.items():
            if s == state_cfg:
                return q
        return None

    def is_injective(self) -> bool:
        return len(set(self.map.values())) == len(self.map)

    def encoding(self) -> StateEncoding:
        return StateEncoding(dict(self.map), {i: r for i, r in enumerate(REGISTERS)}, "X^3")


class DerivationError(UniversalError):
    def __init__(self, message: str, inputs=None, finding: Optional[Finding] = None):
        super().__init__(message)
        self.inputs = inputs
        self.finding = finding


def default_sample(n: int = 20, seed: int = 0, top: int = 2) -> list[tuple]:
    """``n`` reproducible random register vectors with entries in 0..top."""
    rng = random.Random(seed)
    return [tuple(rng.randint(0, top) for _ in REGISTERS) for _ in range(n)]


def derive_dictionary(input_sample: Optional[Sequence[Sequence[int]]] = None, bound_steps: int = 400,
                      window: int = 8, machine: Optional[RegisterMachine] = None,
                      system: Optional[FsMpmrsSystem] = None,
                      check_state_space: bool = False) -> U23Dictionary:
    """Infer the machine state each base-phase configuration encodes.

    For every sample the system is run deterministically while the machine
    runs ``bound_steps`` instructions.  Each base-phase checkpoint with
    register vector ``r`` may stand for any machine state visited within
    ``window`` instructions after the previous checkpoint with registers
    ``r``; candidate sets are intersected over all occurrences in all
    samples.  A configuration whose candidates become empty, or two
    configurations claiming the same state, abort the derivation.
    """
    m = machine or u22()
    sys = system or u23_system()
    if input_sample is None:
        input_sample = default_sample()
    cands: dict = {}
    settled: dict = {}
    notes = []
    for regs in input_sample:
        trace, _ = _machine_trace(m, regs, bound_steps)
        points, end, finding = _checkpoints(sys, regs, 40 * bound_steps + 40)
        if finding is not None:
            raise DerivationError(f"input {tuple(regs)}: {finding}", tuple(regs), finding)
        pos = -1
        for step, s, r in points:
            hits = [j for j in range(pos + 1, min(len(trace), pos + 1 + window)) if trace[j].regs == r]
            if not hits:
                if pos + window >= len(trace):
                    break  # past the machine bound
                raise DerivationError(
                    f"input {tuple(regs)}: checkpoint {s} at system step {step} has registers {r} "
                    f"that the machine does not reach within {window} instructions of step {pos}",
                    tuple(regs))
            here = {trace[j].state for j in hits}
            settled.setdefault(s, Counter())[trace[hits[-1]].state] += 1
            prev = cands.get(s)
            cands[s] = here if prev is None else prev & here
            if not cands[s]:
                raise DerivationError(f"input {tuple(regs)}: no consistent machine state for {s} "
                                      f"(had {sorted(prev)}, now {sorted(here)})", tuple(regs))
            # prefer the earliest hit that is still a candidate
            pos = next((j for j in hits if trace[j].state in cands[s]), hits[0])
        notes.append(f"{tuple(regs)}: {len(points)} checkpoints, run {end}")
    mapping = {}
    for s, qs in sorted(cands.items(), key=lambda kv: kv[0].key()):
        if len(qs) > 1:
            # fused instructions share registers; take where the machine settles
            votes = settled[s]
            q = max(sorted(qs, key=_state_key), key=lambda c: votes[c])
            notes.append(f"{s}: candidates {sorted(qs, key=_state_key)}, settled at {q}")
        else:
            (q,) = qs
        if q in mapping:
            raise DerivationError(f"two configurations claim {q}: {mapping[q]} and {s}")
        mapping[q] = s
    d = U23Dictionary(dict(sorted(mapping.items(), key=lambda kv: _state_key(kv[0]))), notes,
                      len(input_sample))
    if check_state_space:
        space = set(state_configurations_u23(sys))
        outside = [q for q, s in d.map.items() if s not in space]
        if outside:
            raise DerivationError(f"entries outside the state-configuration set: {outside}")
    return d


def _state_key(q: str):
    digits = "".join(c for c in q if c.isdigit())
    return (int(digits) if digits else 1 << 30, q)


def state_configurations_u23(sys: Optional[FsMpmrsSystem] = None, max_iters: int = 1000):
    from .engine import state_configurations

    return state_configurations(sys or u23_system(), max_iters=max_iters)


# ---------------------------------------------------------------------------
# lockstep


@dataclass
class LockstepVerdict:
    inputs: tuple
    status: str  # agree | mismatch | inconclusive
    checkpoints: int = 0
    machine_steps: int = 0
    system_steps: int = 0
    final_r1: Optional[int] = None
    finding: Optional[Finding] = None


def lockstep(regs: Sequence[int], dictionary: U23Dictionary, machine: Optional[RegisterMachine] = None,
             system: Optional[FsMpmrsSystem] = None, bound_steps: int = 400,
             window: int = 12) -> LockstepVerdict:
    """Replay one input against the machine using ``dictionary``.

    Every base-phase configuration must be in the dictionary, and its state
    must occur within ``window`` machine instructions of the previous
    checkpoint with identical registers.  Machine states without an entry
    may be skipped, since a single system phase can cover several
    instructions.
    """
    m = machine or u22()
    sys = system or u23_system()
    regs = tuple(regs) + (0,) * (8 - len(regs))
    trace, halted = _machine_trace(m, regs, bound_steps)
    verdict = LockstepVerdict(regs, "inconclusive", machine_steps=len(trace) - 1)
    points, end, finding = _checkpoints(sys, regs, 40 * bound_steps + 40)

    def bad(f: Finding) -> LockstepVerdict:
        verdict.status, verdict.finding = "mismatch", f
        return verdict

    pos = -1
    for step, s, r in points:
        verdict.system_steps = step
        q = dictionary.lookup(s)
        if q is None:
            return bad(Finding("unknown-state", step, f"base-phase configuration {s} is not in the dictionary"))
        hits = [j for j in range(pos + 1, min(len(trace), pos + 1 + window)) if trace[j].state == q]
        if not hits:
            if pos + window >= len(trace) and not halted:
                return verdict
            return bad(Finding("mismatch", step, f"system at {q} but the machine does not visit {q} "
                                                 f"within {window} instructions of step {pos}"))
        j = hits[0]
        if trace[j].regs != r:
            return bad(Finding("mismatch", step, f"registers at {q}: machine {trace[j].regs} "
                                                 f"(instruction {j}), system {r}"))
        pos = j
        verdict.checkpoints += 1
    if finding is not None:
        return bad(finding)
    if end == "stable":
        if not halted:
            return bad(Finding("stable-early", verdict.system_steps, "system stable while the machine runs"))
        # the stable configuration need not be base phase; re-run to read it
        outcome = run_universal(regs, system=sys, max_steps=40 * bound_steps + 40)
        final = outcome.registers
        if final != trace[-1].regs:
            return bad(Finding("mismatch", outcome.steps, f"final registers: machine {trace[-1].regs}, "
                                                         f"system {final}"))
        verdict.final_r1 = final[1]
        verdict.status = "agree"
        return verdict
    return verdict


# ---------------------------------------------------------------------------
# plain runs


@dataclass
class UniversalOutcome:
    outcome: RunOutcome
    terminal: Optional[Multiset]
    registers: Optional[tuple]
    steps: int
    finding: Optional[Finding] = None

    @property
    def r1(self) -> Optional[int]:
        return None if self.terminal is None else self.terminal["R1"]


def run_universal(regs: Sequence[int] = (), max_steps: int = 100_000,
                  system: Optional[FsMpmrsSystem] = None) -> UniversalOutcome:
    """Run from ``initial_config(regs)`` and report the R1 projection.

    The system is expected to be deterministic at state level; when it is
    not, the run stops with a ``nondeterminism`` finding and the outcome is
    inconclusive.
    """
    sys = system or u23_system()
    cfg = _system(sys.rules, regs).initial
    for step in range(max_steps):
        nxt = _advance(sys, cfg, step)
        if nxt is None:
            out = RunOutcome(OutcomeKind.STABLE, cfg, (cfg,), True, step)
            return UniversalOutcome(out, cfg.project(sys.terminal),
                                    tuple(cfg[r] for r in REGISTERS), step)
        if isinstance(nxt, Finding):
            out = RunOutcome(OutcomeKind.BOUND_EXCEEDED, cfg, (), False, step)
            return UniversalOutcome(out, None, None, step, nxt)
        cfg = nxt[1]
    if not maximal_steps(sys, cfg):
        out = RunOutcome(OutcomeKind.STABLE, cfg, (cfg,), True, max_steps)
        return UniversalOutcome(out, cfg.project(sys.terminal), tuple(cfg[r] for r in REGISTERS), max_steps)
    out = RunOutcome(OutcomeKind.BOUND_EXCEEDED, cfg, (), False, max_steps)
    return UniversalOutcome(out, None, None, max_steps)


def phase_violations(regs: Sequence[int] = (), max_steps: int = 2000,
                     max_configs: int = DEFAULT_MAX_CONFIGS,
                     system: Optional[FsMpmrsSystem] = None) -> list:
    """Reachable configurations (all branches) without exactly 3 of {X, T}."""
    sys = system or u23_system()
    seen, _ = reachable(sys, _system(sys.rules, regs).initial, max_steps, max_configs)
    return [c for c in seen if phase_count(c) != 3]


def minimal_witness(system: Optional[FsMpmrsSystem] = None, max_sum: int = 2,
                    max_steps: int = 20_000) -> Optional[tuple[tuple, Finding]]:
    """First input, by total then lexicographically, whose run produces a finding.

    Findings are state-level nondeterminism or a configuration without
    exactly three phase tokens.  Returns None if no input up to ``max_sum``
    shows one.
    """
    import itertools

    sys = system or u23_system()
    vectors = sorted((v for v in itertools.product(range(max_sum + 1), repeat=len(REGISTERS))
                      if sum(v) <= max_sum), key=lambda v: (sum(v), v))
    for v in vectors:
        _, end, finding = _checkpoints(sys, v, max_steps)
        if finding is not None:
            return v, finding
    return None
