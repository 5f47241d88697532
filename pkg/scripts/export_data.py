"""Regenerate the shipped machine and system files from their definitions."""

from pathlib import Path

from mpmrs.engine import write_system
from mpmrs.examples import example1
from mpmrs.machine import u22, u22_patched, write_machine
from mpmrs.universal import u23_repaired, u23_system

DATA = Path(__file__).resolve().parents[1] / "src" / "mpmrs" / "data"


def main():
    files = {
        "u22.rm": write_machine(u22()),
        "u22-patched.rm": write_machine(u22_patched("q25")),
        "u22-patched-q27.rm": write_machine(u22_patched("q27")),
        "u23.mprs": write_system(u23_system()),
        "u23-repaired.mprs": write_system(u23_repaired()),
        "example1.mprs": write_system(example1()),
    }
    for name, text in files.items():
        (DATA / name).write_text(text)
        print("wrote", DATA / name)


if __name__ == "__main__":
    main()
