"""Scan small U22 inputs with the interpreter and freeze halting ones.

Writes src/mpmrs/data/u22_inputs.json: inputs that halt (with step count
and final registers) and inputs still running after the lockstep horizon.
"""

import argparse
import itertools
import json
from pathlib import Path

from mpmrs.machine import rm_run, u22

OUT = Path(__file__).resolve().parents[1] / "src" / "mpmrs" / "data" / "u22_inputs.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-value", type=int, default=2)
    ap.add_argument("--max-sum", type=int, default=4)
    ap.add_argument("--halting", type=int, default=12, help="how many halting inputs to keep")
    ap.add_argument("--running", type=int, default=10, help="how many long-running inputs to keep")
    ap.add_argument("--horizon", type=int, default=250)
    ap.add_argument("--max-trace", type=int, default=400, help="longest halting run kept")
    args = ap.parse_args()
    m = u22()
    halting, running = [], []
    vectors = sorted((v for v in itertools.product(range(args.max_value + 1), repeat=8)
                      if sum(v) <= args.max_sum), key=lambda v: (sum(v), v))
    for v in vectors:
        out = rm_run(m, v, max_steps=10**6)
        if out.halted and out.steps <= args.max_trace and len(halting) < args.halting:
            halting.append({"inputs": list(v), "steps": out.steps, "final": list(out.config.regs)})
        elif not out.halted or out.steps > args.horizon:
            if len(running) < args.running and (not out.halted or out.steps > args.horizon):
                running.append({"inputs": list(v), "halted": out.halted, "steps": out.steps})
        if len(halting) >= args.halting and len(running) >= args.running:
            break
    doc = {"machine": "u22", "max_steps": 10**6, "horizon": args.horizon,
           "halting": halting, "running": running}
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"{len(halting)} halting, {len(running)} running -> {OUT}")


if __name__ == "__main__":
    main()
