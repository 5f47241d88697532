"""Square/circle flow graphs of finite-state systems, and their DOT text.

Squares are state configurations.  Circles are the intermediate multisets
of a single maximally parallel step, split into the part not yet touched
(``plain``) and the part produced during the step (``marked``), registers
left out.  An arrow is one rule application inside a step; it is annotated
with the registers the rule produces (``+``) and consumes (``-``).  Every
circle hangs off the square it becomes once the step is over.

Steps are enumerated as canonical rule sequences (rule indices never
decrease) over the state configuration plus a padded register supply, the
same bags :func:`~mpmrs.engine.maximal_steps` enumerates.

DOT node names: squares are ``s0, s1, ...`` in canonical multiset order;
circles are ``c0, c1, ...`` ordered by origin square and then by the label
sequence leading to them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .engine import FsMpmrsSystem, register_padding, state_configurations, state_successors
from .multiset import EMPTY, Multiset

MARK = "~"


@dataclass(frozen=True)
class Circle:
    origin: Multiset  # square the step starts from
    path: tuple  # rule labels applied so far, canonical order
    plain: Multiset
    marked: Multiset

    @property
    def unmarked(self) -> Multiset:
        return self.plain + self.marked

    @property
    def key(self) -> tuple:
        return (self.origin.key(), self.path)

    def render(self) -> str:
        parts = [self.plain.render()] if self.plain else []
        parts += [f"{MARK}{s}" + (f"^{n}" if n > 1 else "") for s, n in self.marked.items()]
        return " ".join(parts) if parts else "λ"


@dataclass(frozen=True)
class Arrow:
    src: tuple  # circle key
    dst: tuple
    rule: str
    plus: Multiset = EMPTY
    minus: Multiset = EMPTY

    @property
    def label(self) -> str:
        regs = [f"+{_power(s, n)}" for s, n in self.plus.items()]
        regs += [f"-{_power(s, n)}" for s, n in self.minus.items()]
        return f"{self.rule} / {' '.join(regs)}" if regs else self.rule

    @property
    def annotation(self) -> tuple:
        return (self.plus.key(), self.minus.key())


def _power(s: str, n: int) -> str:
    return f"{s}^{n}" if n > 1 else s


@dataclass
class FlowGraph:
    squares: dict  # state configuration -> filled flag
    circles: dict  # circle key -> Circle
    arrows: list
    attachments: dict  # circle key -> square
    successors: dict = field(default_factory=dict)  # square -> set of one-step successor squares
    states: frozenset = frozenset()  # squares that are state configurations of the system

    def outgoing(self, key: tuple) -> list:
        return [a for a in self.arrows if a.src == key]

    def incoming(self, key: tuple) -> list:
        return [a for a in self.arrows if a.dst == key]

    def root(self, square: Multiset) -> Optional[tuple]:
        key = (square.key(), ())
        return key if key in self.circles else None

    def counts(self) -> tuple[int, int, int]:
        return len(self.squares), len(self.circles), len(self.arrows)


class NotationError(Exception):
    pass


def _steps_from(fsys: FsMpmrsSystem, square: Multiset):
    """Circles and arrows of every canonical run from ``square + padding``."""
    rules = list(fsys.rules)
    regs = fsys.registers
    start = square + register_padding(fsys, square)
    circles, arrows = {}, []

    def grow(path: tuple, last: int, rem: Multiset, produced: Multiset) -> bool:
        """Extend a run; returns whether some completion ends a positive run."""
        complete = False
        any_applicable = False
        for k in range(len(rules)):
            r = rules[k]
            if not r.lhs <= rem:
                continue
            any_applicable = True
            if k < last:
                continue
            new_path = path + (r.label,)
            new_rem = rem - r.lhs
            new_prod = produced + r.rhs
            if grow(new_path, k, new_rem, new_prod):
                src = (square.key(), path)
                dst = (square.key(), new_path)
                arrows.append(Arrow(src, dst, r.label, r.rhs.project(regs), r.lhs.project(regs)))
                circles[dst] = Circle(square, new_path, new_rem.without(regs), new_prod.without(regs))
                complete = True
        return complete or not any_applicable

    if grow((), 0, start, EMPTY):
        circles[(square.key(), ())] = Circle(square, (), square, EMPTY)
    return circles, arrows


def build_flow_graph(fsys: FsMpmrsSystem, max_iters: int = 1000) -> FlowGraph:
    """The unsimplified diagram over every state configuration of ``fsys``."""
    states = state_configurations(fsys, max_iters=max_iters)
    circles, arrows = {}, []
    for x in sorted(states, key=Multiset.key):
        cs, ars = _steps_from(fsys, x)
        circles.update(cs)
        arrows.extend(ars)
    attachments = {k: c.unmarked for k, c in circles.items()}
    circles, arrows, attachments = _merge_terminal(circles, arrows, attachments)
    pure = [r.lhs for r in fsys.rules if not (r.lhs.support() & fsys.registers)]
    squares = {}
    for x in states:
        squares[x] = False
    for k, sq in attachments.items():
        squares.setdefault(sq, False)
    for sq in squares:
        attached = [circles[k] for k, s in attachments.items() if s == sq]
        # filled unless every attached circle still admits a pure-state rule
        squares[sq] = not attached or any(not any(l <= c.plain for l in pure) for c in attached)
    succ = {x: {y for _, y in state_successors(fsys, x)} for x in states}
    arrows.sort(key=lambda a: (a.src, a.dst, a.rule))
    return FlowGraph(dict(sorted(squares.items(), key=lambda kv: kv[0].key())),
                     dict(sorted(circles.items())), arrows, attachments, succ, frozenset(states))


def _merge_terminal(circles: dict, arrows: list, attachments: dict):
    """Merge circles without outgoing arrows that share square, marking and annotation."""
    has_out = {a.src for a in arrows}
    into = {a.dst: a for a in arrows}
    groups = {}
    for k, c in circles.items():
        if k in has_out or k not in into:
            continue
        sig = (attachments[k].key(), c.plain.key(), c.marked.key(), into[k].annotation, c.origin.key())
        groups.setdefault(sig, []).append(k)
    alias = {}
    for keys in groups.values():
        keys.sort()
        for k in keys[1:]:
            alias[k] = keys[0]
    if not alias:
        return circles, arrows, attachments
    circles = {k: c for k, c in circles.items() if k not in alias}
    attachments = {k: s for k, s in attachments.items() if k not in alias}
    seen, merged = set(), []
    for a in arrows:
        a = replace(a, dst=alias.get(a.dst, a.dst))
        sig = (a.src, a.dst, a.rule, a.annotation)
        if sig not in seen:
            seen.add(sig)
            merged.append(a)
    return circles, merged, attachments


def _paths(g: FlowGraph, root: tuple):
    """Every path from ``root`` as a list of arrows (including the empty one)."""
    out = []
    stack = [(root, [])]
    while stack:
        node, path = stack.pop()
        out.append(path)
        for a in g.outgoing(node):
            stack.append((a.dst, path + [a]))
    return out


def simplify(g: FlowGraph) -> FlowGraph:
    """Drop rule paths that can never be taken.

    Suppose a step from square A passes a circle attached to B and then,
    by rules r1..rn, reaches a circle attached to C, where B and C are both
    one-step successors of A.  If nothing but A and the squares on that
    path can reach B, then whenever B is entered r1..rn were not
    applicable, so the same label sequence out of B's root never fires.
    Only arrows are removed; the result is idempotent.
    """
    preds = {}
    for x, ys in g.successors.items():
        for y in ys:
            preds.setdefault(y, set()).add(x)
    doomed = set()
    for a_sq in sorted(g.states, key=Multiset.key):
        root = g.root(a_sq)
        if root is None:
            continue
        succ_a = g.successors.get(a_sq, set())
        for path in _paths(g, root):
            nodes = [root] + [arr.dst for arr in path]
            on_path = {g.attachments.get(n) for n in nodes} | {a_sq}
            for i in range(1, len(nodes)):
                b = g.attachments.get(nodes[i])
                if b not in succ_a or b not in g.states or b == a_sq:
                    continue
                if not preds.get(b, set()) <= on_path:
                    continue
                for j in range(i + 1, len(nodes)):
                    c = g.attachments.get(nodes[j])
                    if c not in succ_a:
                        continue
                    labels = [arr.rule for arr in path[i:j]]
                    doomed.update(_matching_path(g, b, labels, c))
    if not doomed:
        return g
    arrows = [a for a in g.arrows if (a.src, a.dst, a.rule) not in doomed]
    return replace(g, arrows=arrows)


def _matching_path(g: FlowGraph, square: Multiset, labels: list, target: Multiset) -> set:
    """Arrows of the path from ``square``'s root spelling ``labels`` and ending at ``target``."""
    root = g.root(square)
    if root is None or not labels:
        return set()
    found = set()

    def walk(node, k, acc):
        if k == len(labels):
            if g.attachments.get(node) == target:
                found.update(acc)
            return
        for a in g.outgoing(node):
            if a.rule == labels[k]:
                walk(a.dst, k + 1, acc + [(a.src, a.dst, a.rule)])

    walk(root, 0, [])
    return found


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_graph_text(g: FlowGraph, name: str = "mpmrs") -> str:
    """Deterministic DOT text for ``g``.

    Circles with no arrows at all are left out, so a system without rules
    draws its squares only.
    """
    used = {a.src for a in g.arrows} | {a.dst for a in g.arrows}
    sq_ids = {sq: f"s{i}" for i, sq in enumerate(g.squares)}
    circ_keys = [k for k in g.circles if k in used]
    c_ids = {k: f"c{i}" for i, k in enumerate(circ_keys)}
    lines = [f"digraph {name} {{"]
    for sq, filled in g.squares.items():
        style = "filled" if filled else "solid"
        lines.append(f"  {sq_ids[sq]} [shape=box, style={style}, label={_q(sq.render())}];")
    for k in circ_keys:
        lines.append(f"  {c_ids[k]} [shape=ellipse, label={_q(g.circles[k].render())}];")
    for a in g.arrows:
        lines.append(f"  {c_ids[a.src]} -> {c_ids[a.dst]} [label={_q(a.label)}];")
    for k in circ_keys:
        lines.append(f"  {c_ids[k]} -> {sq_ids[g.attachments[k]]} [dir=none, style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
