"""Acceptance criteria 1-9, one PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines as they are
produced, or ``python3 tests/test_acceptance.py`` for the lines alone.  The
lines are also repeated in the pytest terminal summary.
"""

import json
import random
import sys
from collections import Counter
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import brute_force_steps  # noqa: E402

from mpmrs.compiler import (  # noqa: E402
    CompilationOptions,
    calibrated_options,
    compile_basic,
    compile_machine,
    cosimulate,
    drop_rule,
    stats,
)
from mpmrs.engine import (  # noqa: E402
    MpmrsSystem,
    RewriteRule,
    from_antiport,
    is_stable,
    maximal_steps,
    parse_system,
    results,
    run_exhaustive,
    run_seeded,
    state_configurations,
    to_antiport,
)
from mpmrs.examples import data_text, example1, m_copy, m_move, m_parity  # noqa: E402
from mpmrs.machine import rm_run, u22, u22_patched  # noqa: E402
from mpmrs.multiset import Multiset, ms  # noqa: E402
from mpmrs.universal import (  # noqa: E402
    DerivationError,
    default_sample,
    derive_dictionary,
    lockstep,
    minimal_witness,
    phase_count,
    phase_violations,
    u23_repaired,
    u23_system,
)

LINES = {}

LEVELS = {
    "P0": (),
    "P1": ("P1",),
    "P1+P2": ("P1", "P2"),
    "P1+P3": ("P1", "P3"),
    "P1+P3+P4": ("P1", "P3", "P4"),
    "P1+P2+P3": ("P1", "P2", "P3"),
    "P1+P2+P3+P4": ("P1", "P2", "P3", "P4"),
}


def options(m, level: str, **kw) -> CompilationOptions:
    """U22 uses the frozen fusion calibration; small machines fuse everything eligible."""
    passes = LEVELS[level]
    if m.name == "u22" and "P2" in passes:
        return calibrated_options(passes=passes, **kw)
    return CompilationOptions(passes=passes, **kw)


def report(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}"
    LINES[n] = line
    print(line)


def frozen_u22_inputs() -> list:
    doc = json.loads(data_text("u22_inputs.json"))
    return [tuple(h["inputs"]) for h in doc["halting"]]


# ---------------------------------------------------------------------------


def criterion_1():
    sys_ = example1()
    out = run_exhaustive(sys_)
    stable = set(out.configs)
    proj = set(results(sys_))
    ok = out.complete and stable == {ms("A C F^2"), ms("B D^2")} and proj == {ms("F^2"), ms("")}
    return ok, (f"stable {sorted(c.render() for c in stable)}, terminal {sorted(p.render() for p in proj)}; "
                f"the λ result comes from the B D^2 branch")


def criterion_2():
    m = u22()
    plain = stats(compile_basic(m))
    faithful_sys = compile_basic(m, CompilationOptions(faithful_halt=True))
    faithful = stats(faithful_sys)
    rep = cosimulate(m, faithful_sys, frozen_u22_inputs())
    ok = plain == (73, 3) and faithful == (74, 3) and rep.status == "equivalent"
    return ok, f"basic {plain}, faithful-halt {faithful}, faithful-halt co-simulation {rep.status}"


def criterion_3():
    m = u22()
    p1 = stats(compile_machine(m, options(m, "P1")))
    p2 = stats(compile_machine(m, options(m, "P1+P2")))
    p3 = stats(compile_machine(m, options(m, "P1+P2+P3")))
    p4 = stats(compile_machine(m, options(m, "P1+P2+P3+P4")))
    alt = {
        "P1+P3": stats(compile_machine(m, options(m, "P1+P3"))),
        "P1+P3+P4": stats(compile_machine(m, options(m, "P1+P3+P4"))),
        "P1+P2(cap 4)+P3": stats(compile_machine(m, CompilationOptions(passes=("P1", "P2", "P3"),
                                                                       fusion_size_cap=4))),
    }
    below = [k for k, (n, size) in alt.items() if n < 56 and size <= 6]
    matched47 = [k for k, v in alt.items() if v == (47, 6)]
    ok = p2 == (56, 5) and p1[0] >= p2[0] >= p3[0] >= p4[0] and bool(below)
    return ok, (f"P1 {p1}, P1+P2 {p2}, +P3 {p3}, +P4 {p4}; size ≤ 6 below 56: "
                + ", ".join(f"{k} {alt[k]}" for k in below)
                + f"; published 6 | 47 matched by {matched47 or 'none'}")


def _fired(sys_, seed=0, limit=400):
    """Rules used in the first half of a run.

    A rule used only by the final zero test into the halting state can be
    deleted without changing any result, so later rules are not fault targets.
    """
    out = run_seeded(sys_, seed, max_steps=limit, record=True)
    labels = []
    for bag, _ in out.trace[: max(1, len(out.trace) // 2)]:
        for lab in bag:
            if lab not in labels:
                labels.append(lab)
    return labels


def criterion_4():
    rng = random.Random(2024)
    small = {"move": m_move(), "copy": m_copy(), "parity": m_parity()}
    problems = []
    checked = 0
    faults = 0
    for name, m in small.items():
        inputs = [tuple(rng.randint(0, 6) for _ in range(m.registers)) for _ in range(20)]
        for level in LEVELS:
            opts = options(m, level)
            sys_ = compile_machine(m, opts)
            rep = cosimulate(m, sys_, inputs)
            checked += len(inputs)
            if rep.status != "equivalent":
                problems.append(f"{name} {level}: {rep.status}")
            fired = _fired(compile_machine(m, opts, inputs[0] if any(inputs[0]) else (3,) * m.registers))
            for lab in fired:
                bad = cosimulate(m, drop_rule(sys_, lab), inputs)
                faults += 1
                if bad.status != "mismatch" or not bad.witness().witness:
                    problems.append(f"{name} {level} without {lab}: {bad.status}")
    frozen = frozen_u22_inputs()
    m = u22()
    for level in LEVELS:
        opts = options(m, level)
        sys_ = compile_machine(m, opts)
        rep = cosimulate(m, sys_, frozen)
        checked += len(frozen)
        if rep.status != "equivalent":
            problems.append(f"u22 {level}: {rep.status}")
        fired = _fired(compile_machine(m, opts, frozen[0]))
        for lab in (fired[0], fired[len(fired) // 2], fired[-1]):
            bad = cosimulate(m, drop_rule(sys_, lab), frozen[:1])
            faults += 1
            if bad.status != "mismatch" or not bad.witness().witness:
                problems.append(f"u22 {level} without {lab}: {bad.status}")
    ok = not problems and len(frozen) >= 10
    detail = (f"{checked} runs over {len(LEVELS)} pass levels ({len(frozen)} frozen u22 inputs, "
              f"20 random inputs per small machine); {faults} one-rule deletions")
    return ok, detail if ok else detail + "; " + "; ".join(problems)


def criterion_5():
    sys_ = u23_system()
    n, size = stats(sys_)
    shape_ok = n == 23 and size <= 20
    try:
        derive_dictionary(default_sample(), machine=u22(), system=sys_)
        derived, why = True, ""
    except DerivationError as e:
        derived, why = False, str(e)
    found = minimal_witness(sys_, max_sum=0)
    # informative: the repaired table against the q27-patched machine
    m = u22_patched("q27")
    d = derive_dictionary(machine=m, system=u23_repaired())
    verdicts = [lockstep(v, d, m, u23_repaired()) for v in default_sample()]
    tally = Counter(v.status for v in verdicts)
    ok = shape_ok and derived and found is None
    detail = f"{n} rules, max size {size}"
    if not ok:
        regs, finding = found if found else (None, None)
        detail += (f"; printed table rejected: {why or finding}; minimal witness input {list(regs)}: "
                   f"{finding}")
    detail += (f"; informative: repaired table vs q27-patched machine lockstep {dict(sorted(tally.items()))}"
               f", dictionary injective {d.is_injective()}")
    return ok, detail


def _random_system(rng):
    alphabet = [f"s{i}" for i in range(rng.randint(1, 6))]
    rules = []
    for k in range(rng.randint(1, 6)):
        lhs = Counter(rng.choices(alphabet, k=rng.randint(1, 3)))
        rhs = Counter(rng.choices(alphabet, k=rng.randint(0, 3)))
        rules.append((f"r{k}", lhs, rhs))
    cfg = Counter(rng.choices(alphabet, k=rng.randint(0, 12)))
    rs = tuple(RewriteRule(lab, Multiset(l), Multiset(r)) for lab, l, r in rules)
    return rules, cfg, MpmrsSystem(frozenset(alphabet), Multiset(cfg), rs)


def _canon(steps):
    return {(tuple(sorted(b.items())), tuple(sorted(s.items()))) for b, s in steps}


def criterion_6():
    rng = random.Random(606)
    bad = []
    for i in range(200):
        rules, cfg, sys_ = _random_system(rng)
        got = _canon(maximal_steps(sys_, sys_.initial))
        shuffled = list(sys_.rules)
        rng.shuffle(shuffled)
        if got != brute_force_steps(rules, cfg) or got != _canon(maximal_steps(sys_.with_rules(shuffled),
                                                                                sys_.initial)):
            bad.append(i)
    return not bad, f"200 random systems, disagreements {bad}"


def criterion_7():
    ex = state_configurations(example1())
    expected = {ms("A^2 B"), ms("A C"), ms("C D")}
    converged = []
    for m in (u22(), m_move(), m_parity()):
        for level in LEVELS:
            state_configurations(compile_machine(m, options(m, level)))
            converged.append(f"{m.name}/{level}")
    u = len(state_configurations(u23_system()))
    ok = ex == expected
    extra = sorted(c.render() for c in ex - expected)
    missing = sorted(c.render() for c in expected - ex)
    detail = (f"example 1 gives {sorted(c.render() for c in ex)}; extra {extra}, missing {missing}; "
              f"converged on {len(converged)} compiled systems and u23 ({u} configurations)")
    if extra:
        detail += "; B D^2 is reached from A^2 B E^2 by the step r2^2"
    return ok, detail


def criterion_8():
    systems = {n: parse_system(data_text(n)) for n in ("u23.mprs", "u23-repaired.mprs", "example1.mprs")}
    for level in LEVELS:
        systems[f"u22 {level}"] = compile_machine(u22(), options(u22(), level))
    bad = [n for n, s in systems.items() if from_antiport(to_antiport(s)) != s]
    return not bad, f"{len(systems)} systems round-tripped, failures {bad}"


def criterion_9():
    rng = random.Random(909)
    fails = []
    syms = "abc"
    for _ in range(300):
        x, y, z = (Multiset(Counter(rng.choices(syms, k=rng.randint(0, 5)))) for _ in range(3))
        if not ((x + y) - y == x and x <= x + y and x + y == y + x and (x + y) + z == x + (y + z)):
            fails.append(f"multiset laws {x} {y} {z}")
            break
    for _ in range(200):
        _, _, sys_ = _random_system(rng)
        steps = maximal_steps(sys_, sys_.initial)
        if (steps == []) != is_stable(sys_, sys_.initial):
            fails.append("stability vs empty NEXT")
            break
        for bag, _ in steps:
            used = Multiset({})
            for lab, n in bag.items():
                used = used + sys_.rule(lab).lhs.times(n)
            if any(r.lhs <= sys_.initial - used for r in sys_.rules):
                fails.append(f"non-maximal bag {bag}")
    for level in LEVELS:
        for faithful in (False, True):
            sys_ = compile_machine(u22(), options(u22(), level, faithful_halt=faithful))
            if sys_.encoding.inclusion_violations():
                fails.append(f"encoding inclusion at {level}")
    repaired = [v for v in default_sample(4, seed=3) if phase_violations(v, 150, system=u23_repaired())]
    if repaired:
        fails.append(f"repaired table loses phase tokens on {repaired}")
    canon = phase_violations((0,) * 8, max_steps=60)
    if canon:
        c = canon[0]
        fails.append(f"u23 phase conservation: reachable {c.render()} has {phase_count(c)} of X, T "
                     f"(input all zero)")
    checks = "multiset laws, maximal bags, stability vs empty NEXT, encoding non-inclusion, repaired phase tokens"
    if not fails:
        return True, checks + " and u23 phase tokens all hold"
    return False, "; ".join(fails) + f" (also checked: {checks})"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n):
    ok, detail = CRITERIA[n - 1]()
    report(n, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    for i, fn in enumerate(CRITERIA, 1):
        report(i, *fn())
