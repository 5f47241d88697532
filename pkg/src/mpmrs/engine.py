"""Maximally parallel multiset rewriting: rules, systems and execution.

A transition picks a maximal multiset of rules ("rule bag") whose left-hand
sides fit disjointly into the configuration and rewrites all of them at once.
Bags are enumerated by backtracking over the rule list with multiplicities,
which visits each bag exactly once instead of every permutation of it.
"""

from __future__ import annotations

import logging
import random
import re
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Iterable, Optional

from .multiset import EMPTY, Multiset, MultisetError, check_symbol, msum

log = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 10_000
DEFAULT_MAX_CONFIGS = 100_000


class EngineError(Exception):
    pass


class StateSpaceError(EngineError):
    """The state-configuration iteration did not close within its bound."""


@dataclass(frozen=True)
class RewriteRule:
    label: str
    lhs: Multiset
    rhs: Multiset

    def __post_init__(self):
        check_symbol(self.label)
        if not self.lhs:
            raise EngineError(f"rule {self.label}: left-hand side must be non-empty")

    @property
    def size(self) -> int:
        return self.lhs.size + self.rhs.size

    @classmethod
    def parse(cls, text: str) -> "RewriteRule":
        label, sep, body = text.partition(":")
        if not sep or "->" not in body:
            raise EngineError(f"cannot parse rule {text!r}")
        lhs, _, rhs = body.partition("->")
        return cls(label.strip(), Multiset.parse(lhs), Multiset.parse(rhs))

    def render(self) -> str:
        return f"{self.label}: {self.lhs.render()} -> {self.rhs.render()}"

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class StateEncoding:
    """Maps register-machine states to the state configurations that encode them.

    ``states`` maps a machine state id to its base-phase state configuration;
    a configuration is a checkpoint for ``q`` when its non-register part equals
    ``states[q]`` exactly.  ``register_map`` maps register index to symbol.
    """

    states: dict
    register_map: dict
    phase: str = "base"
    source: object = field(default=None, compare=False, repr=False)

    def lookup(self, state_cfg: Multiset) -> Optional[str]:
        return self._inverse.get(state_cfg)

    @cached_property
    def _inverse(self) -> dict:
        return {cfg: q for q, cfg in self.states.items()}

    def inclusion_violations(self) -> list[tuple[str, str]]:
        """Pairs (p, q) whose encodings satisfy enc(p) <= enc(q), p != q."""
        bad = []
        items = sorted(self.states.items(), key=lambda kv: kv[0])
        for p, ep in items:
            for q, eq in items:
                if p != q and ep <= eq:
                    bad.append((p, q))
        return bad

    def registers_of(self, cfg: Multiset, n: int) -> tuple[int, ...]:
        return tuple(cfg[self.register_map[i]] for i in range(n))


@dataclass(frozen=True)
class MpmrsSystem:
    alphabet: frozenset
    initial: Multiset
    rules: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        object.__setattr__(self, "rules", tuple(self.rules))
        seen = set()
        for r in self.rules:
            if r.label in seen:
                raise EngineError(f"duplicate rule label {r.label!r}")
            seen.add(r.label)
            stray = (r.lhs.support() | r.rhs.support()) - self.alphabet
            if stray:
                raise EngineError(f"rule {r.label} uses symbols outside the alphabet: {sorted(stray)}")
        stray = self.initial.support() - self.alphabet
        if stray:
            raise EngineError(f"initial multiset uses symbols outside the alphabet: {sorted(stray)}")

    def rule(self, label: str) -> RewriteRule:
        return self._by_label[label]

    @cached_property
    def _by_label(self) -> dict:
        return {r.label: r for r in self.rules}

    @cached_property
    def _candidate_cache(self) -> dict:
        return {}

    def candidates(self, cfg: Multiset) -> list:
        """Rules applicable to ``cfg``, in rule order."""
        support = cfg.support()
        cache = self._candidate_cache
        pool = cache.get(support)
        if pool is None:
            pool = [r for r in self.rules if r.lhs.support() <= support]
            if len(cache) < 4096:
                cache[support] = pool
        return [r for r in pool if r.lhs <= cfg]

    def with_rules(self, rules: Iterable[RewriteRule]) -> "MpmrsSystem":
        return replace(self, rules=tuple(rules))


@dataclass(frozen=True)
class FsMpmrsSystem(MpmrsSystem):
    registers: frozenset = frozenset()
    terminal: frozenset = frozenset()
    encoding: Optional[StateEncoding] = field(default=None, compare=False)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "registers", frozenset(self.registers))
        object.__setattr__(self, "terminal", frozenset(self.terminal))

    @property
    def state_symbols(self) -> frozenset:
        return self.alphabet - self.registers

    def state_of(self, cfg: Multiset) -> Multiset:
        return cfg.without(self.registers)

    def registers_of(self, cfg: Multiset) -> Multiset:
        return cfg.project(self.registers)

    def with_rules(self, rules: Iterable[RewriteRule]) -> "FsMpmrsSystem":
        return replace(self, rules=tuple(rules))


# ---------------------------------------------------------------------------
# single rules


def applicable(rule: RewriteRule, cfg: Multiset) -> bool:
    return rule.lhs <= cfg


def apply_once(rule: RewriteRule, cfg: Multiset) -> Multiset:
    if not rule.lhs <= cfg:
        raise EngineError(f"rule {rule.label} is not applicable to {cfg}")
    return cfg - rule.lhs + rule.rhs


def is_stable(sys: MpmrsSystem, cfg: Multiset) -> bool:
    return not any(r.lhs <= cfg for r in sys.rules)


# ---------------------------------------------------------------------------
# maximally parallel transitions


def _bags(cands: list, cfg: Multiset):
    """Yield (counts, remainder) for every maximal bag over ``cands``."""
    n = len(cands)
    counts = [0] * n
    lhs = [r.lhs for r in cands]

    def rec(k: int, rem: Multiset):
        if k == n:
            if any(l <= rem for l in lhs):
                return
            yield tuple(counts), rem
            return
        top = rem.max_copies(lhs[k])
        # the last rule can only leave a maximal remainder at full count
        low = top if k == n - 1 else 0
        for c in range(top, low - 1, -1):
            counts[k] = c
            yield from rec(k + 1, rem - lhs[k].times(c) if c else rem)
        counts[k] = 0

    yield from rec(0, cfg)


def maximal_steps(sys: MpmrsSystem, cfg: Multiset) -> list[tuple[Multiset, Multiset]]:
    """All maximal rule bags applicable to ``cfg`` with their successors.

    Returns ``(bag, successor)`` pairs sorted canonically; ``bag`` is a
    multiset of rule labels.  The list is empty iff ``cfg`` is stable.
    """
    cands = sys.candidates(cfg)
    if not cands:
        return []
    out = {}
    for counts, rem in _bags(cands, cfg):
        bag = Multiset._raw({r.label: c for r, c in zip(cands, counts) if c})
        succ = rem + msum(r.rhs.times(c) for r, c in zip(cands, counts) if c)
        out[bag] = succ
    return sorted(out.items(), key=lambda bs: (bs[0].key(), bs[1].key()))


def next_configs(sys: MpmrsSystem, cfg: Multiset) -> list[Multiset]:
    """NEXT(cfg): distinct successors, canonically sorted."""
    return sorted({succ for _, succ in maximal_steps(sys, cfg)}, key=Multiset.key)


# ---------------------------------------------------------------------------
# runs


class OutcomeKind(str, Enum):
    STABLE = "stable"
    BOUND_EXCEEDED = "bound_exceeded"
    RESULT_SET = "result_set"


@dataclass
class RunOutcome:
    kind: OutcomeKind
    config: Optional[Multiset] = None
    configs: tuple = ()
    complete: bool = True
    steps_taken: int = 0
    trace: list = field(default_factory=list)
    cycle_detected: bool = False
    explored: int = 0

    @property
    def stable(self) -> bool:
        return self.kind is OutcomeKind.STABLE


def run_seeded(sys: MpmrsSystem, seed: int = 0, max_steps: int = DEFAULT_MAX_STEPS,
               initial: Optional[Multiset] = None, record: bool = True) -> RunOutcome:
    """Follow one computation, resolving nondeterminism with ``random.Random(seed)``."""
    rng = random.Random(seed)
    cfg = sys.initial if initial is None else initial
    trace = []
    for step in range(max_steps + 1):
        options = maximal_steps(sys, cfg)
        if not options:
            return RunOutcome(OutcomeKind.STABLE, config=cfg, steps_taken=step, trace=trace)
        if step == max_steps:
            break
        bag, cfg = options[rng.randrange(len(options))] if len(options) > 1 else options[0]
        if record:
            trace.append((bag, cfg))
    return RunOutcome(OutcomeKind.BOUND_EXCEEDED, config=cfg, steps_taken=max_steps, trace=trace)


def run_exhaustive(sys: MpmrsSystem, max_steps: int = DEFAULT_MAX_STEPS,
                   max_configs: int = DEFAULT_MAX_CONFIGS,
                   initial: Optional[Multiset] = None) -> RunOutcome:
    """Breadth-first search of the transition relation from the initial multiset.

    ``max_steps`` bounds the search depth and ``max_configs`` the number of
    distinct configurations visited.  ``complete`` is true iff the frontier
    emptied within both bounds.
    """
    start = sys.initial if initial is None else initial
    if is_stable(sys, start):
        return RunOutcome(OutcomeKind.RESULT_SET, configs=(start,), complete=True, explored=1)
    seen = {start}
    stable = set()
    frontier = deque([(start, 0)])
    complete = True
    cycle = False
    depth = 0
    while frontier:
        cfg, d = frontier.popleft()
        depth = max(depth, d)
        if d >= max_steps:
            complete = False
            continue
        for _, succ in maximal_steps(sys, cfg):
            if succ in seen:
                cycle = True
                continue
            if len(seen) >= max_configs:
                complete = False
                continue
            seen.add(succ)
            if is_stable(sys, succ):
                stable.add(succ)
            else:
                frontier.append((succ, d + 1))
    configs = tuple(sorted(stable, key=Multiset.key))
    return RunOutcome(OutcomeKind.RESULT_SET, configs=configs, complete=complete,
                      steps_taken=depth, cycle_detected=cycle, explored=len(seen))


def reachable(sys: MpmrsSystem, initial: Optional[Multiset] = None,
              max_steps: int = DEFAULT_MAX_STEPS,
              max_configs: int = DEFAULT_MAX_CONFIGS) -> tuple[list, bool]:
    """Every configuration reachable within the bounds, in BFS order.

    The flag is true iff the search closed without hitting a bound.
    """
    start = sys.initial if initial is None else initial
    seen = {start: 0}
    order = [start]
    frontier = deque([start])
    complete = True
    while frontier:
        cfg = frontier.popleft()
        d = seen[cfg]
        steps = maximal_steps(sys, cfg)
        if steps and d >= max_steps:
            complete = False
            continue
        for _, succ in steps:
            if succ in seen:
                continue
            if len(seen) >= max_configs:
                complete = False
                break
            seen[succ] = d + 1
            order.append(succ)
            frontier.append(succ)
    return order, complete


def results(fsys: FsMpmrsSystem, max_steps: int = DEFAULT_MAX_STEPS,
            max_configs: int = DEFAULT_MAX_CONFIGS) -> frozenset:
    """Terminal-register projections of every reachable stable configuration."""
    out = run_exhaustive(fsys, max_steps, max_configs)
    return frozenset(c.project(fsys.terminal) for c in out.configs)


# ---------------------------------------------------------------------------
# finite-state analysis


class RuleKind(str, Enum):
    PURE_STATE = "pure_state"
    REGISTER_DEPENDENT = "register_dependent"


def classify_rule(fsys: FsMpmrsSystem, rule: RewriteRule) -> RuleKind:
    if rule.lhs.project(fsys.registers):
        return RuleKind.REGISTER_DEPENDENT
    return RuleKind.PURE_STATE


def validate(fsys: FsMpmrsSystem) -> list[str]:
    """Violations of the finite-state system invariants, as messages."""
    problems = []
    if not fsys.registers < fsys.alphabet:
        extra = sorted(fsys.registers - fsys.alphabet)
        problems.append(
            f"registers must be a proper subset of the alphabet (outside: {extra})" if extra
            else "registers must be a proper subset of the alphabet (they cover all of it)"
        )
    if not fsys.terminal <= fsys.registers:
        problems.append(f"terminal registers not among registers: {sorted(fsys.terminal - fsys.registers)}")
    for r in fsys.rules:
        if r.lhs.support() <= fsys.registers:
            problems.append(f"rule {r.label}: lhs has no non-register symbol")
    return problems


def register_padding(fsys: FsMpmrsSystem, state_cfg: Multiset) -> Multiset:
    """Enough register copies to stand in for an infinite supply.

    No step can consume more than (max register symbols on a lhs) * |X|
    copies of any register, since every rule uses a non-register symbol.
    """
    per_rule = max((r.lhs.project(fsys.registers).size for r in fsys.rules), default=0)
    bound = per_rule * state_cfg.size
    if not bound:
        return EMPTY
    return Multiset._raw({reg: bound for reg in fsys.registers})


def _state_bags(fsys: FsMpmrsSystem, state_cfg: Multiset):
    """Bags whose state parts fit ``state_cfg`` and leave no pure-state rule applicable.

    These are exactly the maximal steps of ``state_cfg + R'`` over all
    register multisets ``R'``: supplying just the registers a bag consumes
    makes every omitted register-dependent rule inapplicable, and extra
    registers can only make maximality harder.
    """
    cands = [r for r in fsys.rules if r.lhs.without(fsys.registers) <= state_cfg]
    parts = [r.lhs.without(fsys.registers) for r in cands]
    pure = [p for r, p in zip(cands, parts) if p == r.lhs]
    counts = [0] * len(cands)

    def rec(k: int, rem: Multiset):
        if k == len(cands):
            if not any(p <= rem for p in pure):
                yield tuple(counts), rem
            return
        top = rem.max_copies(parts[k])
        for c in range(top, -1, -1):
            counts[k] = c
            yield from rec(k + 1, rem - parts[k].times(c) if c else rem)
        counts[k] = 0

    for cnt, rem in rec(0, state_cfg):
        bag = Multiset._raw({r.label: c for r, c in zip(cands, cnt) if c})
        produced = msum(r.rhs.times(c) for r, c in zip(cands, cnt) if c)
        yield bag, rem + fsys.state_of(produced)


def state_successors(fsys: FsMpmrsSystem, state_cfg: Multiset,
                     mode: str = "any") -> list[tuple[Multiset, Multiset]]:
    """One-step successors of a state configuration, as (bag, state) pairs.

    ``mode="any"`` ranges over every register content (some R', R'' with
    ``X R' => Y R''``).  ``mode="padded"`` uses one padded register supply
    standing for an unbounded one, which never takes a zero branch.
    """
    seen = {}
    if mode == "any":
        steps = _state_bags(fsys, state_cfg)
    elif mode == "padded":
        padded = state_cfg + register_padding(fsys, state_cfg)
        steps = ((bag, fsys.state_of(succ)) for bag, succ in maximal_steps(fsys, padded))
    else:
        raise EngineError(f"unknown state-successor mode {mode!r}")
    for bag, succ in steps:
        if bag:
            seen.setdefault(bag, succ)
    return sorted(seen.items(), key=lambda bs: (bs[0].key(), bs[1].key()))


def state_configurations(fsys: FsMpmrsSystem, max_iters: int = 1000,
                         max_configs: int = DEFAULT_MAX_CONFIGS, mode: str = "any") -> frozenset:
    """Least fixed point of state configurations reachable from the initial one.

    Raises :class:`StateSpaceError` if the iteration has not closed after
    ``max_iters`` rounds or ``max_configs`` configurations.
    """
    start = fsys.state_of(fsys.initial)
    known = {start}
    layer = [start]
    for _ in range(max_iters):
        nxt = []
        for x in layer:
            for _, y in state_successors(fsys, x, mode):
                if y not in known:
                    known.add(y)
                    nxt.append(y)
        if not nxt:
            return frozenset(known)
        if len(known) > max_configs:
            break
        layer = nxt
    raise StateSpaceError(
        f"state space not closed within bound ({len(known)} state configurations after "
        f"{max_iters} iterations); the system may not be finite-state"
    )


# ---------------------------------------------------------------------------
# one-membrane antiport P systems


class UnsupportedFeature(EngineError):
    pass


@dataclass(frozen=True)
class AntiportRule:
    """Exchange rule ``(out_part, out; in_part, in)`` on membrane 1."""

    label: str
    out_part: Multiset
    in_part: Multiset
    membrane: int = 1

    @property
    def is_symport(self) -> bool:
        return not self.out_part or not self.in_part

    def render(self) -> str:
        return f"{self.label}: ({self.out_part.render()}, out; {self.in_part.render()}, in)"


@dataclass(frozen=True)
class AntiportSystem:
    objects: frozenset
    membranes: int
    contents: tuple  # initial multiset per membrane
    environment: frozenset
    rules: tuple
    output_membrane: int = 1
    output_alphabet: Optional[frozenset] = None


def to_antiport(fsys: FsMpmrsSystem) -> AntiportSystem:
    rules = tuple(AntiportRule(r.label, r.lhs, r.rhs) for r in fsys.rules)
    return AntiportSystem(fsys.alphabet, 1, (fsys.initial,), fsys.registers, rules,
                          1, fsys.terminal)


def from_antiport(ap: AntiportSystem) -> FsMpmrsSystem:
    if ap.membranes != 1 or len(ap.contents) != 1:
        raise UnsupportedFeature(f"only one-membrane systems are supported (got {ap.membranes})")
    for r in ap.rules:
        if r.membrane != 1:
            raise UnsupportedFeature(f"rule {r.label} is attached to membrane {r.membrane}")
        if r.is_symport:
            raise UnsupportedFeature(f"rule {r.label} is a symport rule")
    terminal = ap.environment if ap.output_alphabet is None else ap.output_alphabet
    rules = tuple(RewriteRule(r.label, r.out_part, r.in_part) for r in ap.rules)
    return FsMpmrsSystem(ap.objects, ap.contents[0], rules, ap.environment, terminal)


# ---------------------------------------------------------------------------
# text format

_DIRECTIVE = re.compile(r"@(\w+)\s*(.*)")


class ParseError(EngineError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {msg}" if line else msg)
        self.line = line
        self.col = col


def parse_system(text: str) -> FsMpmrsSystem:
    """Parse the ``@alphabet/@registers/@terminal/@init`` + rule-lines format.

    Without ``@registers`` the result has no registers (a plain system); an
    omitted ``@alphabet`` is inferred from the rules and initial multiset.
    """
    alphabet = None
    registers: frozenset = frozenset()
    terminal = None
    initial = EMPTY
    rules = []
    labels = {}
    where = {}  # symbol -> (line, col) of first use

    def note(ms_: Multiset, lineno: int, raw: str):
        for sym in ms_.support():
            where.setdefault(sym, (lineno, raw.find(sym) + 1))

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        stripped = line.strip()
        try:
            m = _DIRECTIVE.fullmatch(stripped)
            if m:
                key, val = m.group(1), m.group(2)
                if key == "alphabet":
                    alphabet = frozenset(check_symbol(t) for t in val.split())
                elif key == "registers":
                    registers = frozenset(check_symbol(t) for t in val.split())
                elif key == "terminal":
                    terminal = frozenset(check_symbol(t) for t in val.split())
                elif key == "init":
                    initial = Multiset.parse(val)
                    note(initial, lineno, raw)
                else:
                    raise ParseError(f"unknown directive @{key}", lineno, col)
                continue
            rule = RewriteRule.parse(stripped)
        except ParseError:
            raise
        except (EngineError, MultisetError) as exc:
            raise ParseError(str(exc), lineno, col) from None
        if rule.label in labels:
            raise ParseError(f"duplicate rule label {rule.label!r} (first on line {labels[rule.label]})",
                             lineno, col)
        labels[rule.label] = lineno
        note(rule.lhs + rule.rhs, lineno, raw)
        rules.append(rule)
    used = set(initial.support()) | set(registers)
    for r in rules:
        used |= r.lhs.support() | r.rhs.support()
    if alphabet is None:
        alphabet = frozenset(used)
    else:
        unknown = sorted(used - alphabet)
        if unknown:
            line, col = min(where.get(u, (0, 0)) for u in unknown)
            raise ParseError(f"unknown symbols (not in @alphabet): {' '.join(unknown)}", line, col)
    if terminal is None:
        terminal = registers
    try:
        return FsMpmrsSystem(alphabet, initial, tuple(rules), registers, terminal)
    except EngineError as exc:
        raise ParseError(str(exc)) from None


def write_system(sys: MpmrsSystem) -> str:
    lines = [f"@alphabet {' '.join(sorted(sys.alphabet))}"]
    if isinstance(sys, FsMpmrsSystem) and sys.registers:
        lines.append(f"@registers {' '.join(sorted(sys.registers))}")
        lines.append(f"@terminal {' '.join(sorted(sys.terminal))}")
    lines.append(f"@init {sys.initial.render()}")
    lines.extend(r.render() for r in sys.rules)
    return "\n".join(lines) + "\n"
