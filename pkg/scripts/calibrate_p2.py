"""Freeze the increment-fusion subset for U22.

Fusing every eligible increment gives fewer rules than the published row
for P1+P2.  This script enumerates subsets of the eligible increments in
ascending size, then in numeric state order, and keeps the first one whose
rule count hits the target.  The result goes to data/p2_calibration.json.
"""

import argparse
import itertools
import json
from pathlib import Path

from mpmrs.compiler import CompilationOptions, compile_machine, fusion_candidates, stats
from mpmrs.machine import state_sort_key, u22

OUT = Path(__file__).resolve().parents[1] / "src" / "mpmrs" / "data" / "p2_calibration.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target-rules", type=int, default=56)
    ap.add_argument("--cap", type=int, default=5)
    args = ap.parse_args()
    m = u22()
    p1 = compile_machine(m, CompilationOptions(passes=("P1",)))
    eligible = sorted({t for _, t, _ in fusion_candidates(p1, args.cap)}, key=state_sort_key)
    print("eligible:", " ".join(eligible))
    for k in range(len(eligible) + 1):
        for subset in itertools.combinations(eligible, k):
            opts = CompilationOptions(passes=("P1", "P2"), fusion_size_cap=args.cap,
                                      fusion_targets=frozenset(subset))
            count, size = stats(compile_machine(m, opts))
            if count == args.target_rules:
                doc = {"u22": {"cap": args.cap, "fuse": list(subset), "rules": count, "max_size": size}}
                OUT.write_text(json.dumps(doc, indent=1) + "\n")
                print(f"fuse {list(subset)} -> ({count}, {size}); wrote {OUT}")
                return
    raise SystemExit(f"no subset reaches {args.target_rules} rules")


if __name__ == "__main__":
    main()
