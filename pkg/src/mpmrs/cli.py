"""Command-line front end.

Exit codes:

* 0 success
* 1 verification failed (mismatch, finding, non-equivalence)
* 2 bad invocation, unreadable or malformed input file
* 3 a bound was reached before an answer (inconclusive)

Errors are reported on stderr as ``error: <Class>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import examples
from .compiler import (
    CompilationOptions,
    CompileError,
    calibrated_options,
    compile_machine,
    cosimulate,
    load_calibration,
    lineage,
    stats,
)
from .engine import (
    DEFAULT_MAX_CONFIGS,
    DEFAULT_MAX_STEPS,
    EngineError,
    FsMpmrsSystem,
    parse_system,
    run_exhaustive,
    run_seeded,
    write_system,
)
from .machine import MachineError, RegisterMachine, parse_machine, rm_run
from .multiset import MultisetError
from .notation import build_flow_graph, emit_graph_text, simplify
from .universal import (
    DerivationError,
    default_sample,
    derive_dictionary,
    lockstep,
    run_universal,
    u23_repaired,
    u23_system,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BOUND = 0, 1, 2, 3

BUILTIN_MACHINES = {
    "u22": "u22.rm",
    "u22-patched": "u22-patched.rm",
    "u22-patched-q27": "u22-patched-q27.rm",
}
BUILTIN_SYSTEMS = {
    "u23": "u23.mprs",
    "u23-repaired": "u23-repaired.mprs",
    "example1": "example1.mprs",
}
SMALL_MACHINES = {"move": examples.MOVE, "copy": examples.COPY, "parity": examples.PARITY}


class UsageError(Exception):
    pass


def parse_machine_file(text: str, name: str = "") -> RegisterMachine:
    return parse_machine(text, name)


def parse_system_file(text: str) -> FsMpmrsSystem:
    sys_ = parse_system(text)
    if not isinstance(sys_, FsMpmrsSystem):
        sys_ = FsMpmrsSystem(sys_.alphabet, sys_.initial, sys_.rules)
    return sys_


def load_machine(ref: str) -> RegisterMachine:
    """A machine file path or a built-in name."""
    if ref in BUILTIN_MACHINES:
        return parse_machine_file(examples.data_text(BUILTIN_MACHINES[ref]), ref)
    if ref in SMALL_MACHINES:
        return parse_machine_file(SMALL_MACHINES[ref], ref)
    return parse_machine_file(_read(ref), Path(ref).stem)


def load_system(ref: str) -> FsMpmrsSystem:
    if ref in BUILTIN_SYSTEMS:
        return parse_system_file(examples.data_text(BUILTIN_SYSTEMS[ref]))
    return parse_system_file(_read(ref))


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _is_machine(ref: str) -> bool:
    if ref in BUILTIN_MACHINES or ref in SMALL_MACHINES:
        return True
    if ref in BUILTIN_SYSTEMS:
        return False
    return Path(ref).suffix == ".rm"


def _vector(text: Optional[str]) -> tuple:
    if not text:
        return ()
    try:
        vals = tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise UsageError(f"bad register vector {text!r}; expected e.g. 2,3,0") from None
    if any(v < 0 for v in vals):
        raise UsageError("register values must be nonnegative")
    return vals


def _vectors(text: Optional[str]) -> list:
    return [_vector(t) for t in text.split(";") if t.strip()] if text else []


def _options(args) -> CompilationOptions:
    passes = tuple(p.strip().upper() for p in (args.passes or "").split(",") if p.strip())
    return CompilationOptions(faithful_halt=args.faithful_halt, fusion_size_cap=args.fusion_cap,
                              passes=passes)


def _compiled(args, ref: str, inputs: Sequence[int] = ()) -> tuple[RegisterMachine, FsMpmrsSystem]:
    m = load_machine(ref)
    opts = _options(args)
    if args.calibrated:
        opts = calibrated_options(ref, opts.passes, faithful_halt=opts.faithful_halt)
    return m, compile_machine(m, opts, inputs)


def _report_text(sys_: FsMpmrsSystem) -> str:
    lines = ["stage | rules | max size | states eliminated | rules glued"]
    for e in lineage(sys_).report:
        lines.append(f"{e.stage} | {e.rule_count} | {e.max_rule_size} | {e.states_eliminated} | {e.rules_glued}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommands


def cmd_run_rm(args, out) -> int:
    m = load_machine(args.machine)
    res = rm_run(m, _vector(args.inputs), max_steps=args.max_steps, record=args.trace)
    if args.trace:
        for c in res.trace:
            print(f"{c.state} {list(c.regs)}", file=out)
    status = "halted" if res.halted else "bound reached"
    print(f"{status} after {res.steps} steps: {res.config.state} {list(res.config.regs)}", file=out)
    return EXIT_OK if res.halted else EXIT_BOUND


def cmd_compile(args, out) -> int:
    _, sys_ = _compiled(args, args.machine, _vector(args.inputs))
    out.write(write_system(sys_))
    if args.report:
        print(_report_text(sys_), file=sys.stderr)
    return EXIT_OK


def cmd_run_mpmrs(args, out) -> int:
    sys_ = load_system(args.system)
    if args.inputs:
        from .compiler import with_registers

        sys_ = with_registers(sys_, _vector(args.inputs))
    if args.exhaustive:
        res = run_exhaustive(sys_, args.max_steps, args.max_configs)
        for c in res.configs:
            print(f"stable {c.render()} | terminal {c.project(sys_.terminal).render()}", file=out)
        print(f"complete={res.complete} explored={res.explored} cycle={res.cycle_detected}", file=out)
        return EXIT_OK if res.complete else EXIT_BOUND
    res = run_seeded(sys_, seed=args.seed, max_steps=args.max_steps, record=args.trace)
    if args.trace:
        for bag, cfg in res.trace:
            print(f"[{bag.render()}] {cfg.render()}", file=out)
    print(f"{res.kind.value} after {res.steps_taken} steps: {res.config.render()}", file=out)
    if res.stable:
        print(f"terminal {res.config.project(sys_.terminal).render()}", file=out)
        return EXIT_OK
    return EXIT_BOUND


def cmd_verify(args, out) -> int:
    m, sys_ = _compiled(args, args.machine)
    inputs = _vectors(args.inputs)
    if args.frozen:
        doc = json.loads(examples.data_text("u22_inputs.json"))
        inputs += [tuple(h["inputs"]) for h in doc["halting"]]
    if not inputs:
        raise UsageError("no inputs given; use --inputs '1,2;0,3' or --frozen")
    rep = cosimulate(m, sys_, inputs, bound=args.max_steps)
    for v in rep.verdicts:
        line = f"{list(v.inputs)}: {v.status}"
        if v.final_registers is not None:
            line += f" final {list(v.final_registers)}"
        if v.reason:
            line += f" ({v.reason})"
        print(line, file=out)
        if v.status == "mismatch":
            for bag, cfg in v.witness:
                print(f"    [{bag.render()}] {cfg.render()}", file=out)
    print(f"overall: {rep.status}", file=out)
    return {"equivalent": EXIT_OK, "mismatch": EXIT_FAIL}.get(rep.status, EXIT_BOUND)


def cmd_universal(args, out) -> int:
    system = u23_repaired() if args.repaired else u23_system()
    regs = _vector(args.inputs)
    if args.lockstep:
        m = load_machine(args.machine)
        sample = _vectors(args.sample) or default_sample()
        try:
            d = derive_dictionary(sample, bound_steps=args.bound, machine=m, system=system)
        except DerivationError as e:
            print(f"derivation failed: {e}", file=out)
            if e.finding is not None:
                for bag, cfg in e.finding.witness:
                    print(f"    [{bag.render()}] {cfg.render()}", file=out)
            return EXIT_FAIL
        for q, s in d.map.items():
            print(f"{q} = {s.render()}", file=out)
        v = lockstep(regs, d, m, system, bound_steps=args.bound)
        print(f"lockstep {list(v.inputs)}: {v.status}, {v.checkpoints} checkpoints", file=out)
        if v.finding is not None:
            print(f"  {v.finding}", file=out)
        return {"agree": EXIT_OK, "mismatch": EXIT_FAIL}.get(v.status, EXIT_BOUND)
    res = run_universal(regs, max_steps=args.max_steps, system=system)
    if res.finding is not None:
        print(f"finding: {res.finding}", file=out)
        for bag, cfg in res.finding.witness:
            print(f"    [{bag.render()}] {cfg.render()}", file=out)
        return EXIT_FAIL
    if res.terminal is None:
        print(f"bound reached after {res.steps} steps", file=out)
        return EXIT_BOUND
    print(f"stable after {res.steps} steps; R1 = {res.r1}; registers {list(res.registers)}", file=out)
    return EXIT_OK


def cmd_diagram(args, out) -> int:
    if _is_machine(args.system):
        _, sys_ = _compiled(args, args.system)
    else:
        sys_ = load_system(args.system)
    g = build_flow_graph(sys_)
    if args.simplify:
        g = simplify(g)
    if args.format == "dot":
        out.write(emit_graph_text(g))
    else:
        n_sq, n_c, n_a = g.counts()
        print(f"squares {n_sq}, circles {n_c}, arrows {n_a}", file=out)
        for sq, filled in g.squares.items():
            print(f"[{'#' if filled else ' '}] {sq.render()}", file=out)
        for a in g.arrows:
            print(f"  {g.circles[a.src].render()} --{a.label}--> {g.circles[a.dst].render()}", file=out)
    return EXIT_OK


def cmd_stats(args, out) -> int:
    if _is_machine(args.system):
        _, sys_ = _compiled(args, args.system)
        print(_report_text(sys_), file=out)
    else:
        sys_ = load_system(args.system)
    n, size = stats(sys_)
    print(f"rules {n}, max size {size}", file=out)
    return EXIT_OK


def cmd_table(args=None, out=None) -> str:
    """Rule count and size at each pass level next to the published rows."""
    from .machine import u22

    m = u22()
    cal = load_calibration()["u22"]
    rows = []

    def row(label, passes, published, **kw):
        n, size = stats(compile_machine(m, CompilationOptions(passes=passes, **kw)))
        if published is None:
            status = "extra"
        else:
            status = "match" if (size, n) == published else f"deviation (published {published[0]} | {published[1]})"
        rows.append(f"{label:<34} {size} | {n} | {status}")

    row("P0", (), (3, 73))
    row("P0 faithful-halt", (), None, faithful_halt=True)
    row("P1", ("P1",), None)
    row(f"P1+P2 cap {cal['cap']} fuse {','.join(cal['fuse'])}", ("P1", "P2"), (5, 56),
        fusion_size_cap=cal["cap"], fusion_targets=frozenset(cal["fuse"]))
    row("P1+P2 cap 5 fuse all", ("P1", "P2"), None)
    row("P1+P3", ("P1", "P3"), (6, 47))
    row("P1+P2 cap 4+P3", ("P1", "P2", "P3"), (6, 47), fusion_size_cap=4)
    row("P1+P3+P4", ("P1", "P3", "P4"), None)
    row("P1+P2 cap 4+P3+P4", ("P1", "P2", "P3", "P4"), None, fusion_size_cap=4)
    rows.append(f"{'external reference':<34} 7 | 43 | not computed")
    rows.append(f"{'external reference':<34} 11 | 30 | not computed")
    u = u23_system()
    n, size = stats(u)
    status = "match" if n == 23 and size <= 20 else "deviation"
    rows.append(f"{'universal (23-rule table)':<34} ≤20 | {n} | {status} (computed max size {size})")
    matched47 = any("| 47 | match" in r for r in rows)
    rows.append(f"published 6 | 47 matched: {'yes' if matched47 else 'no'}")
    text = "configuration                      size | rules | status\n" + "\n".join(rows) + "\n"
    if out is not None:
        out.write(text)
    return text


# ---------------------------------------------------------------------------
# argument parsing


def _add_compile_flags(p):
    p.add_argument("--passes", default="", help="comma-separated subset of p1,p2,p3,p4")
    p.add_argument("--fusion-cap", type=int, default=5, help="largest rule P2 may create (default 5)")
    p.add_argument("--faithful-halt", action="store_true", help="keep the zero rule into the final state")
    p.add_argument("--calibrated", action="store_true",
                   help="use the frozen P2 fusion subset for a built-in machine")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpmrs", description="Maximally parallel multiset rewriting toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-rm", help="run a register machine")
    p.add_argument("machine", help="machine file or built-in (u22, u22-patched, move, copy, parity)")
    p.add_argument("--inputs", help="register vector, e.g. 2,3")
    p.add_argument("--max-steps", type=int, default=10**6)
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_run_rm)

    p = sub.add_parser("compile", help="compile a register machine to a multiset rewriting system")
    p.add_argument("machine")
    p.add_argument("--inputs", help="initial register vector")
    p.add_argument("--report", action="store_true", help="print the pass report on stderr")
    _add_compile_flags(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run-mpmrs", help="run a system file")
    p.add_argument("system", help="system file or built-in (u23, u23-repaired, example1)")
    p.add_argument("--inputs", help="replace initial registers R0, R1, ...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.add_argument("--max-configs", type=int, default=DEFAULT_MAX_CONFIGS)
    p.add_argument("--exhaustive", action="store_true", help="explore every branch")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_run_mpmrs)

    p = sub.add_parser("verify", help="co-simulate a machine against its compilation")
    p.add_argument("machine")
    p.add_argument("--inputs", help="vectors separated by ';', e.g. '2,3;0,1'")
    p.add_argument("--frozen", action="store_true", help="add the frozen U22 halting inputs")
    p.add_argument("--max-steps", type=int, default=100_000, help="machine step bound per input")
    _add_compile_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("universal", help="run the 23-rule universal system")
    p.add_argument("--inputs", help="R0..R7 values")
    p.add_argument("--max-steps", type=int, default=100_000)
    p.add_argument("--repaired", action="store_true", help="use the repaired table instead of the printed one")
    p.add_argument("--lockstep", action="store_true", help="derive a dictionary and compare with a machine")
    p.add_argument("--machine", default="u22")
    p.add_argument("--sample", help="inputs for dictionary derivation, ';'-separated")
    p.add_argument("--bound", type=int, default=400, help="machine instructions per lockstep run")
    p.set_defaults(func=cmd_universal)

    p = sub.add_parser("diagram", help="square/circle flow graph of a system")
    p.add_argument("system", help="system file, built-in system, or machine (compiled first)")
    p.add_argument("--format", choices=("text", "dot"), default="text")
    p.add_argument("--simplify", action="store_true")
    _add_compile_flags(p)
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("stats", help="rule count and largest rule")
    p.add_argument("system", help="system file, built-in system, or machine (compiled first)")
    _add_compile_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("table", help="pass-level counts next to the published table")
    p.set_defaults(func=lambda a, o: (cmd_table(a, o), EXIT_OK)[1])
    return ap


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, EngineError, MachineError, MultisetError, CompileError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
