"""Maximally parallel multiset rewriting: engine, register-machine compiler,
the 23-rule universal system and co-simulation tooling."""

from .multiset import EMPTY, Multiset, MultisetError
from .engine import (
    FsMpmrsSystem,
    MpmrsSystem,
    RewriteRule,
    RunOutcome,
    applicable,
    apply_once,
    classify_rule,
    is_stable,
    maximal_steps,
    parse_system,
    results,
    run_exhaustive,
    run_seeded,
    state_configurations,
    validate,
    write_system,
)
from .machine import RegisterMachine, RmConfiguration, parse_machine, rm_run, rm_step, u22, u22_patched
from .compiler import CompilationOptions, compile_basic, compile_machine, cosimulate, stats
from .universal import derive_dictionary, initial_config, run_universal, u23_repaired, u23_system

__version__ = "0.1.0"
